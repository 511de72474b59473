"""Modal assurance criterion, mode pairing, and method comparison.

MAC is computed in the Euclidean inner product (real modes of undamped
symmetric pencils, so the conjugation drops out). The scoring average runs
over the *flexible* modes of the full model: unpaired full modes count as
zero, so a reduced model that misses modes is penalized — which is exactly
how an ill-conditioned basis shows up.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from .eigen import ModeSet
from .errors import InvalidArgumentError

PairingRule = Literal["greedy", "sorted"]


@dataclass
class MacMatrix:
    values: np.ndarray
    row_context: str = ""
    col_context: str = ""

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass
class QualityReport:
    method: str
    dof_reduced: int
    condition_number: float
    mac_matrix: Optional[MacMatrix] = None
    mac_average: Optional[float] = None
    pairing: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)


def mac(U: np.ndarray, V: np.ndarray) -> MacMatrix:
    """MAC_{ij} = |u_i' v_j|^2 / ((u_i' u_i)(v_j' v_j)) for column families."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if U.ndim == 2 and U.shape[0] == 1:
        U = U.T
    if V.ndim == 2 and V.shape[0] == 1:
        V = V.T
    if U.shape[0] != V.shape[0]:
        raise InvalidArgumentError(
            f"vector lengths differ: {U.shape[0]} vs {V.shape[0]}"
        )
    uu = np.einsum("ij,ij->j", U, U)
    vv = np.einsum("ij,ij->j", V, V)
    for name, norms in (("U", uu), ("V", vv)):
        bad = np.where(norms == 0.0)[0]
        if bad.size:
            raise InvalidArgumentError(
                f"column {bad[0]} of {name} is a zero vector; MAC is undefined"
            )
    cross = U.T @ V
    values = (cross**2) / np.outer(uu, vv)
    return MacMatrix(values=np.clip(values, 0.0, None))


def pair_and_average(
    full: ModeSet,
    reduced: ModeSet,
    skip_rigid: bool = True,
    pairing: PairingRule = "greedy",
) -> tuple[list[tuple[int, int]], float]:
    """Pair reduced modes to full modes and average the paired MAC values.

    Greedy pairing repeatedly takes the largest unpaired MAC entry;
    'sorted' pairs by frequency order. Full flexible modes left unpaired
    contribute zero to the average, which is returned as a percentage.
    Returned index pairs refer to positions in the original ModeSets.
    """
    f_off = full.rigid_count if skip_rigid else 0
    r_off = reduced.rigid_count if skip_rigid else 0
    F = full.shapes[:, f_off:]
    R = reduced.shapes[:, r_off:]
    if F.shape[1] == 0 or R.shape[1] == 0:
        raise InvalidArgumentError("cannot pair empty flexible mode sets")

    mac_fr = mac(F, R).values
    nf, nr = mac_fr.shape
    pairs: list[tuple[int, int]] = []

    if pairing == "greedy":
        work = mac_fr.copy()
        for _ in range(min(nf, nr)):
            i, j = np.unravel_index(np.argmax(work), work.shape)
            pairs.append((int(i) + f_off, int(j) + r_off))
            work[i, :] = -1.0
            work[:, j] = -1.0
    elif pairing == "sorted":
        pairs = [(i + f_off, i + r_off) for i in range(min(nf, nr))]
    else:
        raise InvalidArgumentError(f"unknown pairing rule {pairing!r}")

    total = sum(mac_fr[i - f_off, j - r_off] for i, j in pairs)
    average = 100.0 * total / nf
    pairs.sort()
    return pairs, float(average)


@dataclass
class ComparisonRow:
    method: str
    dof_reduced: int
    mac_average: Optional[float]
    condition_number: float


@dataclass
class ComparisonTable:
    rows: list[ComparisonRow]

    def to_dicts(self) -> list[dict]:
        return [
            {
                "method": r.method,
                "dof_reduced": r.dof_reduced,
                "mac_average": r.mac_average,
                "condition_number": r.condition_number,
            }
            for r in self.rows
        ]

    def to_text(self) -> str:
        header = f"{'method':<10} {'DoF':>6} {'MAC avg %':>10} {'cond(T)':>12}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            mac_s = f"{r.mac_average:.2f}" if r.mac_average is not None else "n/a"
            lines.append(
                f"{r.method:<10} {r.dof_reduced:>6d} {mac_s:>10} "
                f"{r.condition_number:>12.4g}"
            )
        return "\n".join(lines)


def compare_methods(reports: Sequence[QualityReport]) -> ComparisonTable:
    """Merge per-method reports into one table, best MAC average first."""
    rows = [
        ComparisonRow(
            method=r.method,
            dof_reduced=r.dof_reduced,
            mac_average=r.mac_average,
            condition_number=r.condition_number,
        )
        for r in reports
    ]
    rows.sort(
        key=lambda r: (-(r.mac_average if r.mac_average is not None else -1.0), r.method)
    )
    return ComparisonTable(rows=rows)
