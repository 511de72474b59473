"""Generalized symmetric eigensolves with mass-normalized mode sets.

Handles the free-free case (semi-definite stiffness) through a spectral
shift on the sparse path and reports rigid-body modes at exactly 0 Hz.
Dense solves are used below a DoF threshold, shift-invert Lanczos above it.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np
import scipy.linalg as la
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .errors import (
    ConditioningError,
    DefinitenessError,
    InvalidArgumentError,
    NumericError,
)
from .models import ComponentModel, DENSE_DOF_THRESHOLD, dense

TWO_PI = 2.0 * np.pi

# Rigid-mode classification: the first elastic frequency is estimated from
# the relative eigenvalue gap, then the cut is 1e-4 x that estimate with an
# absolute floor of 1e-6 Hz.
RIGID_GAP_REL = 1e-9
RIGID_FREQ_FACTOR = 1e-4
RIGID_FREQ_FLOOR_HZ = 1e-6


@dataclass(frozen=True)
class BandSpec:
    """Frequency band of interest, in Hz."""

    f_min: float
    f_max: float

    def __post_init__(self):
        if not (0.0 <= self.f_min < self.f_max):
            raise InvalidArgumentError(
                f"band must satisfy 0 <= f_min < f_max, got [{self.f_min}, {self.f_max}]"
            )


@dataclass
class ModeSet:
    """Mass-normalized eigenpairs over a stated DoF set.

    frequencies are in Hz, ascending, with the rigid-body modes (reported
    at exactly 0 Hz) first. shapes holds one column per mode.
    """

    frequencies: np.ndarray
    shapes: np.ndarray
    dof_context: str
    rigid_count: int = 0

    @property
    def n_modes(self) -> int:
        return int(self.frequencies.size)

    def elastic(self) -> "ModeSet":
        """The flexible (non-rigid) subset."""
        r = self.rigid_count
        return ModeSet(
            frequencies=self.frequencies[r:],
            shapes=self.shapes[:, r:],
            dof_context=self.dof_context,
            rigid_count=0,
        )

    def in_band(self, band: BandSpec) -> "ModeSet":
        keep = (self.frequencies >= band.f_min) & (self.frequencies <= band.f_max)
        rigid = int(np.count_nonzero(keep[: self.rigid_count]))
        return ModeSet(
            frequencies=self.frequencies[keep],
            shapes=self.shapes[:, keep],
            dof_context=self.dof_context,
            rigid_count=rigid,
        )


def canonicalize_signs(shapes: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive."""
    out = shapes.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        idx = int(np.argmax(np.abs(col)))
        if col[idx] < 0:
            out[:, k] = -col
    return out


def _classify_rigid(lam: np.ndarray) -> int:
    """Number of leading near-zero eigenvalues of an ascending spectrum."""
    if lam.size == 0:
        return 0
    scale = max(float(lam[-1]), 0.0)
    if scale <= 0.0:
        return int(lam.size)
    elastic = lam[lam > RIGID_GAP_REL * scale]
    if elastic.size == 0:
        return int(lam.size)
    f_first = np.sqrt(elastic[0]) / TWO_PI
    f_cut = max(RIGID_FREQ_FLOOR_HZ, RIGID_FREQ_FACTOR * f_first)
    freqs = np.sqrt(np.clip(lam, 0.0, None)) / TWO_PI
    return int(np.count_nonzero(freqs < f_cut))


def _mass_normalize(shapes: np.ndarray, M: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->j", shapes, M @ shapes))
    return shapes / norms


def _check_spd_mass(M: np.ndarray) -> None:
    try:
        la.cholesky(M, lower=True)
    except la.LinAlgError as exc:
        raise DefinitenessError(f"mass matrix is not positive definite: {exc}") from exc


def _dense_pencil(M: np.ndarray, K: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lam, V = la.eigh(K, M)
    return lam, V


def _sparse_pencil(
    M, K, f_max: float, max_modes: Optional[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Shift-invert Lanczos with a negative spectral shift.

    Factorizing K - (-sigma) M = K + sigma M keeps the operator definite
    even for a free-free stiffness; eigenvalues nearest -sigma are the
    smallest of the pencil.
    """
    n = M.shape[0]
    Ms, Ks = sparse.csc_matrix(M), sparse.csc_matrix(K)
    sigma = 0.01 * float(np.mean(Ks.diagonal() / Ms.diagonal()))
    target = (TWO_PI * f_max) ** 2
    k = min(max_modes or 32, n - 2) or 1
    while True:
        try:
            lam, V = spla.eigsh(Ks, k=k, M=Ms, sigma=-sigma, which="LM")
        except spla.ArpackNoConvergence as exc:
            raise NumericError(
                f"eigensolver did not converge: {len(exc.eigenvalues)} of {k} "
                f"eigenvalues found"
            ) from exc
        order = np.argsort(lam)
        lam, V = lam[order], V[:, order]
        enough = (max_modes is not None and k >= max_modes) or k >= n - 2
        if enough or lam[-1] > target:
            return lam, V
        k = min(2 * k, n - 2)


def solve_modes(
    M: np.ndarray,
    K: np.ndarray,
    band: BandSpec,
    max_modes: Optional[int] = None,
    dof_context: str = "global",
    dense_threshold: int = DENSE_DOF_THRESHOLD,
) -> ModeSet:
    """All eigenpairs of the (K, M) pencil with frequency inside the band.

    Modes are mass-normalized, sorted ascending, sign-canonicalized, and
    rigid-body modes are reported at exactly 0 Hz.
    """
    n = M.shape[0]
    if K.shape != M.shape:
        raise InvalidArgumentError(f"shape mismatch: M {M.shape} vs K {K.shape}")

    if n <= dense_threshold:
        Md, Kd = dense(M), dense(K)
        _check_spd_mass(Md)
        lam, V = _dense_pencil(Md, Kd)
    else:
        lam, V = _sparse_pencil(M, K, band.f_max, max_modes)
        Md = M

    rigid = _classify_rigid(lam)
    freqs = np.sqrt(np.clip(lam, 0.0, None)) / TWO_PI
    freqs[:rigid] = 0.0

    keep = (freqs >= band.f_min) & (freqs <= band.f_max)
    if max_modes is not None:
        extra = np.cumsum(keep) > max_modes
        keep &= ~extra
    freqs, V = freqs[keep], V[:, keep]
    rigid = int(np.count_nonzero(freqs == 0.0))

    V = _mass_normalize(V, Md if n <= dense_threshold else M)
    V = canonicalize_signs(V)
    return ModeSet(
        frequencies=freqs, shapes=V, dof_context=dof_context, rigid_count=rigid
    )


def solve_component_modes(
    c: ComponentModel,
    band: BandSpec,
    max_modes: Optional[int] = None,
    include_rigid: bool = True,
) -> ModeSet:
    """Free-free modes of one component, on its local DoF set."""
    ms = solve_modes(
        c.mass,
        c.stiffness,
        band,
        max_modes=max_modes,
        dof_context=f"component{c.id}",
    )
    return ms if include_rigid else ms.elastic()


def solve_fixed_interface_modes(c: ComponentModel, band: BandSpec) -> ModeSet:
    """Modes of a component with its junction DoF clamped.

    Shapes live on the interior DoF block, in partition order.
    """
    if c.partition.junction.size == 0:
        raise InvalidArgumentError("component has no junction DoF to clamp")
    if c.partition.interior.size == 0:
        raise InvalidArgumentError("component has no interior DoF")
    M_ii, _, _ = c.submatrices("mass")
    K_ii, _, _ = c.submatrices("stiffness")
    return solve_modes(
        M_ii, K_ii, band, dof_context=f"component{c.id}:interior"
    )


def basis_condition_number(T: np.ndarray) -> float:
    s = la.svd(T, compute_uv=False)
    if s[-1] <= 0.0:
        return float("inf")
    return float(s[0] / s[-1])


def solve_reduced(
    T: Union[np.ndarray, "object"],
    sys,
    band: BandSpec,
    rank_rtol: float = 1e-10,
) -> ModeSet:
    """Solve the reduced pencil (T'KT, T'MT) and back-project to global DoF.

    Accepts either a raw column matrix or any object with a `columns`
    attribute (a ReductionBasis). Raises ConditioningError when T is rank
    deficient at rank_rtol relative to its largest singular value.
    """
    cols = getattr(T, "columns", T)
    cols = np.asarray(cols, dtype=float)
    s = la.svd(cols, compute_uv=False)
    if s.size == 0 or s[-1] < rank_rtol * s[0]:
        cond = float("inf") if s.size == 0 or s[-1] == 0 else float(s[0] / s[-1])
        raise ConditioningError(
            f"reduction basis is rank deficient (condition number {cond:.3e})",
            condition_number=cond,
        )

    M = dense(sys.mass)
    K = dense(sys.stiffness)
    Mr = cols.T @ M @ cols
    Kr = cols.T @ K @ cols
    Mr = (Mr + Mr.T) / 2.0
    Kr = (Kr + Kr.T) / 2.0
    try:
        lam, Q = la.eigh(Kr, Mr)
    except la.LinAlgError as exc:
        # The projected mass lost definiteness to roundoff: the basis is
        # numerically rank deficient even though the SVD test passed.
        cond = float(s[0] / s[-1])
        raise ConditioningError(
            f"reduced mass matrix is numerically singular (basis condition "
            f"number {cond:.3e}): {exc}",
            condition_number=cond,
        ) from exc

    rigid = _classify_rigid(lam)
    freqs = np.sqrt(np.clip(lam, 0.0, None)) / TWO_PI
    freqs[:rigid] = 0.0

    keep = (freqs >= band.f_min) & (freqs <= band.f_max)
    freqs, Q = freqs[keep], Q[:, keep]
    rigid = int(np.count_nonzero(freqs == 0.0))

    shapes = cols @ Q
    shapes = _mass_normalize(shapes, M)
    shapes = canonicalize_signs(shapes)
    return ModeSet(
        frequencies=freqs, shapes=shapes, dof_context="global", rigid_count=rigid
    )
