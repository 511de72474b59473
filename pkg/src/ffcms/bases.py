"""Reduction-basis construction.

Three families are built here:

* the Craig-Bampton baseline (fixed-interface modes + static constraint
  modes, one per junction DoF);
* the cross-interface method: each component receives the junction traces
  found in the *other* component's free-free modes, with its interior
  responding through the dynamic stiffness at sampling frequencies, and
  the pool filtered by the Rayleigh coefficient root;
* the SVD-interface method: a common orthonormal junction space from the
  SVD of both components' mode traces, imposed on both interiors
  simultaneously, selected by singular value.

Coupling candidates are orthogonalized against the free-free mode block
only (candidates are *not* orthonormalized among themselves), so the
condition number of the resulting basis remains a faithful diagnostic of
each method; near-duplicates are dropped by a rank test against the
running accepted set, which bounds the conditioning at roughly
1/drop_tol.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence, Union

import numpy as np
import scipy.linalg as la

from .assembly import AssembledSystem, assemble, build_dof_maps
from .eigen import (
    BandSpec,
    ModeSet,
    TWO_PI,
    basis_condition_number,
    solve_component_modes,
    solve_fixed_interface_modes,
)
from .errors import (
    EmptyBasisError,
    FactorizationError,
    InvalidArgumentError,
    NearSingularityError,
)
from .models import ComponentModel, dense

Method = Literal["CB", "CROSS", "SVD"]


# ---------------------------------------------------------------------------
# Column provenance tags
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FreeModeTag:
    component: int
    index: int
    kind: str = "free_free_mode"


@dataclass(frozen=True)
class FixedModeTag:
    component: int
    index: int
    kind: str = "fixed_interface_mode"


@dataclass(frozen=True)
class ConstraintModeTag:
    junction_dof: int
    kind: str = "constraint_mode"


@dataclass(frozen=True)
class CouplingTag:
    method: str
    omega: float
    source: int
    receiver: Optional[int] = None
    kind: str = "coupling_vector"


@dataclass(frozen=True)
class ArnoldiTag:
    target_mode: int
    step: int  # step 0 marks a restart (Ritz shape) column
    kind: str = "arnoldi_vector"


ColumnTag = Union[FreeModeTag, FixedModeTag, ConstraintModeTag, CouplingTag, ArnoldiTag]


def tag_to_dict(tag: ColumnTag) -> dict:
    d = {"kind": tag.kind}
    for name, value in tag.__dict__.items():
        if name != "kind":
            d[name] = value
    return d


def tag_from_dict(d: dict) -> ColumnTag:
    kinds = {
        "free_free_mode": FreeModeTag,
        "fixed_interface_mode": FixedModeTag,
        "constraint_mode": ConstraintModeTag,
        "coupling_vector": CouplingTag,
        "arnoldi_vector": ArnoldiTag,
    }
    cls = kinds[d["kind"]]
    kwargs = {k: v for k, v in d.items() if k != "kind"}
    return cls(**kwargs)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass
class ReductionBasis:
    """Ordered basis columns on global DoF with per-column provenance."""

    columns: np.ndarray
    tags: list
    condition_number: float = float("nan")
    dropped: list = field(default_factory=list)

    def __post_init__(self):
        if self.columns.ndim != 2:
            raise InvalidArgumentError("basis columns must form a 2-D matrix")
        if self.columns.shape[1] != len(self.tags):
            raise InvalidArgumentError(
                f"{self.columns.shape[1]} columns but {len(self.tags)} tags"
            )
        if np.isnan(self.condition_number):
            self.condition_number = basis_condition_number(self.columns)

    @property
    def n_columns(self) -> int:
        return int(self.columns.shape[1])

    def columns_tagged(self, kind: str) -> np.ndarray:
        keep = [i for i, t in enumerate(self.tags) if t.kind == kind]
        return self.columns[:, keep]

    def tags_of_kind(self, kind: str) -> list:
        return [t for t in self.tags if t.kind == kind]


@dataclass
class CouplingVector:
    """A global coupling deformation sampled at one circular frequency."""

    shape: np.ndarray
    omega: float
    rayleigh_root: float
    method: str
    source: int
    receiver: Optional[int] = None
    singular_value: Optional[float] = None

    def tag(self) -> CouplingTag:
        return CouplingTag(
            method=self.method,
            omega=self.omega,
            source=self.source,
            receiver=self.receiver,
        )


@dataclass
class InterfaceBasis:
    """Orthonormal junction-DoF directions with their singular values.

    singular_values holds the full descending list from the SVD; the
    retained columns correspond to its leading entries (threshold cut).
    """

    columns: np.ndarray
    singular_values: np.ndarray
    threshold: float

    @property
    def n_retained(self) -> int:
        return int(self.columns.shape[1])

    @property
    def retained_singular_values(self) -> np.ndarray:
        return self.singular_values[: self.n_retained]


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def rayleigh_root(theta: np.ndarray, K: np.ndarray, M: np.ndarray) -> float:
    """sqrt(theta'K theta / theta'M theta): the frequency a shape belongs to."""
    theta = np.asarray(theta, dtype=float)
    num = float(theta @ (K @ theta))
    den = float(theta @ (M @ theta))
    if den <= 0.0:
        raise InvalidArgumentError("Rayleigh root of a zero (or massless) shape")
    return float(np.sqrt(max(num, 0.0) / den))


def free_mode_columns(
    sys: AssembledSystem,
    modes1: ModeSet,
    modes2: ModeSet,
    c1: ComponentModel,
    c2: ComponentModel,
) -> tuple[np.ndarray, list]:
    """Embed per-component free modes as global basis columns with tags."""
    cols, tags = [], []
    for c, ms in ((c1, modes1), (c2, modes2)):
        mp = sys.map_of(c.id)
        for k in range(ms.n_modes):
            g = np.zeros(sys.n_global)
            g[mp] = ms.shapes[:, k]
            cols.append(g)
            tags.append(FreeModeTag(component=c.id, index=k))
    if not cols:
        raise EmptyBasisError("no free-free modes in the requested band")
    return np.column_stack(cols), tags


def _interior_ops(c: ComponentModel, omega: float):
    """LU of Z_ii(omega) and the Z_ij(omega) block for one component."""
    Z = dense(c.dynamic_stiffness(omega))
    i, j = c.partition.interior, c.partition.junction
    Z_ii = Z[np.ix_(i, i)]
    Z_ij = Z[np.ix_(i, j)]
    try:
        lu = la.lu_factor(Z_ii)
    except la.LinAlgError as exc:
        raise FactorizationError(
            f"Z_ii of component {c.id} is singular at omega={omega:.6g}"
        ) from exc
    return lu, Z_ij


def _guard_sampling_frequencies(
    components: Sequence[ComponentModel], omegas: Sequence[float]
) -> None:
    """Refuse omegas within 0.1% of a fixed-interface resonance."""
    max_omega = max(omegas, default=0.0)
    if max_omega <= 0.0:
        return
    band = BandSpec(0.0, 2.0 * max_omega / TWO_PI + 1.0)
    for c in components:
        fixed = solve_fixed_interface_modes(c, band)
        w_fixed = TWO_PI * fixed.frequencies
        for omega in omegas:
            gap = np.abs(w_fixed - omega)
            hits = np.where(gap < 1e-3 * np.maximum(w_fixed, 1e-300))[0]
            if hits.size:
                f_hz = fixed.frequencies[hits[0]]
                raise NearSingularityError(
                    f"omega={omega:.6g} rad/s sits within 0.1% of the "
                    f"fixed-interface resonance {f_hz:.6g} Hz of component {c.id}"
                )


# ---------------------------------------------------------------------------
# Craig-Bampton baseline
# ---------------------------------------------------------------------------


def constraint_modes(
    c1: ComponentModel, c2: ComponentModel, sys: Optional[AssembledSystem] = None
) -> tuple[np.ndarray, list]:
    """Static constraint modes, one global column per junction DoF.

    Column g carries a unit displacement of junction DoF g with both
    interiors responding statically: psi_i = -K_ii^-1 K_ij e_g.
    """
    if sys is None:
        sys = assemble(c1, c2)
    nj = sys.junction_global.size
    cols = np.zeros((sys.n_global, nj))
    cols[sys.junction_global, np.arange(nj)] = 1.0
    for c in (c1, c2):
        K_ii, K_ij, _ = c.submatrices("stiffness")
        try:
            cho = la.cho_factor(K_ii)
        except la.LinAlgError as exc:
            raise FactorizationError(
                f"interior stiffness of component {c.id} is singular; the "
                "component mesh appears disconnected"
            ) from exc
        psi = -la.cho_solve(cho, K_ij)
        mp = sys.map_of(c.id)
        cols[mp[c.partition.interior], :] += psi
    tags = [ConstraintModeTag(junction_dof=g) for g in range(nj)]
    return cols, tags


def craig_bampton_basis(
    c1: ComponentModel, c2: ComponentModel, band: BandSpec
) -> ReductionBasis:
    """Fixed-interface modes of both components in the band + constraint modes."""
    sys = assemble(c1, c2)
    cols, tags = [], []
    for c in (c1, c2):
        fixed = solve_fixed_interface_modes(c, band)
        mp = sys.map_of(c.id)
        interior_global = mp[c.partition.interior]
        for k in range(fixed.n_modes):
            g = np.zeros(sys.n_global)
            g[interior_global] = fixed.shapes[:, k]
            cols.append(g)
            tags.append(FixedModeTag(component=c.id, index=k))
    psi, psi_tags = constraint_modes(c1, c2, sys)
    T = np.column_stack(cols + [psi[:, g] for g in range(psi.shape[1])])
    # Unit-normalized columns keep the condition number a pure angle measure.
    T = T / np.linalg.norm(T, axis=0)
    return ReductionBasis(columns=T, tags=tags + psi_tags)


# ---------------------------------------------------------------------------
# Cross-interface coupling vectors
# ---------------------------------------------------------------------------


def cross_coupling_vectors(
    c1: ComponentModel,
    c2: ComponentModel,
    free_modes: dict[int, ModeSet],
    omegas: Sequence[float],
) -> list[CouplingVector]:
    """Impose each component's junction traces on the other component.

    For receiver k and donor p, the junction trace of every donor mode is
    applied to the receiver and its interior responds through
    -Z_k,ii(omega)^-1 Z_k,ij(omega). The Rayleigh root uses the receiving
    component's matrices. Output order: omega ascending, receiver 1 then
    2, donor mode index ascending.
    """
    comps = {1: c1, 2: c2}
    _guard_sampling_frequencies((c1, c2), omegas)
    sys = assemble(c1, c2)
    out: list[CouplingVector] = []
    for omega in sorted(omegas):
        ops = {k: _interior_ops(comps[k], omega) for k in (1, 2)}
        for receiver in (1, 2):
            donor = 2 if receiver == 1 else 1
            rc, dc = comps[receiver], comps[donor]
            lu, Z_ij = ops[receiver]
            traces = dc.partition.junction
            donor_shapes = free_modes[donor].shapes
            K_r = dense(rc.stiffness)
            M_r = dense(rc.mass)
            for idx in range(donor_shapes.shape[1]):
                t = donor_shapes[traces, idx]
                theta_i = -la.lu_solve(lu, Z_ij @ t)
                local = np.zeros(rc.n_dof)
                local[rc.partition.interior] = theta_i
                local[rc.partition.junction] = t
                r = rayleigh_root(local, K_r, M_r)
                g = np.zeros(sys.n_global)
                g[sys.map_of(receiver)] = local
                out.append(
                    CouplingVector(
                        shape=g,
                        omega=omega,
                        rayleigh_root=r,
                        method="CROSS",
                        source=idx,
                        receiver=receiver,
                    )
                )
    return out


def filter_by_rayleigh(
    vectors: Sequence[CouplingVector],
    band: BandSpec,
    keep: int,
    policy: Literal["smallest", "nearest"] = "smallest",
) -> list[CouplingVector]:
    """Keep the coupling vectors whose Rayleigh roots favor the band.

    'smallest' keeps the smallest roots; 'nearest' keeps the smallest
    distance to the band [2*pi*f_min, 2*pi*f_max]. Requesting more than
    available returns everything with a warning.
    """
    if keep < 1:
        raise InvalidArgumentError(f"keep must be >= 1, got {keep}")
    lo, hi = TWO_PI * band.f_min, TWO_PI * band.f_max

    def band_distance(v: CouplingVector) -> float:
        if lo <= v.rayleigh_root <= hi:
            return 0.0
        return min(abs(v.rayleigh_root - lo), abs(v.rayleigh_root - hi))

    if policy == "smallest":
        key = lambda v: (v.rayleigh_root, v.omega, v.receiver or 0, v.source)
    elif policy == "nearest":
        key = lambda v: (band_distance(v), v.rayleigh_root, v.omega, v.source)
    else:
        raise InvalidArgumentError(f"unknown Rayleigh policy {policy!r}")

    ordered = sorted(vectors, key=key)
    if keep > len(ordered):
        warnings.warn(
            f"requested {keep} coupling vectors but only {len(ordered)} exist",
            stacklevel=2,
        )
        return ordered
    return ordered[:keep]


# ---------------------------------------------------------------------------
# SVD-interface coupling vectors
# ---------------------------------------------------------------------------


def svd_interface_basis(
    c1: ComponentModel,
    c2: ComponentModel,
    free_modes_1: ModeSet,
    free_modes_2: ModeSet,
    sv_threshold: float,
) -> InterfaceBasis:
    """Common junction space from the SVD of both components' mode traces.

    Junction-trace columns are normalized to unit Euclidean length before
    the SVD so high-frequency modes cannot dominate the decomposition;
    directions with singular value >= sv_threshold are retained.
    """
    if free_modes_1.n_modes == 0 or free_modes_2.n_modes == 0:
        raise InvalidArgumentError("both free-free mode sets must be nonempty")
    traces = []
    for c, ms in ((c1, free_modes_1), (c2, free_modes_2)):
        block = ms.shapes[c.partition.junction, :]
        full_norms = np.linalg.norm(ms.shapes, axis=0)
        for k in range(block.shape[1]):
            col = block[:, k]
            norm = np.linalg.norm(col)
            if norm > 1e-12 * max(full_norms[k], 1e-300):
                traces.append(col / norm)
    if not traces:
        raise EmptyBasisError("no free-free mode moves the junction")
    A = np.column_stack(traces)
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    retained = int(np.count_nonzero(s >= sv_threshold))
    if retained == 0:
        raise EmptyBasisError(
            f"no singular value reaches the threshold {sv_threshold} "
            f"(largest is {s[0]:.4g})"
        )
    return InterfaceBasis(
        columns=U[:, :retained], singular_values=s, threshold=sv_threshold
    )


def svd_coupling_vectors(
    c1: ComponentModel,
    c2: ComponentModel,
    Tj: InterfaceBasis,
    omegas: Sequence[float],
) -> list[CouplingVector]:
    """One global vector per retained junction direction and omega.

    The junction carries the direction while BOTH interiors respond
    simultaneously through their dynamic stiffness. The Rayleigh root of
    these global shapes uses the assembled matrices.
    """
    _guard_sampling_frequencies((c1, c2), omegas)
    sys = assemble(c1, c2)
    K_g, M_g = sys.stiffness, sys.mass
    comps = {1: c1, 2: c2}
    out: list[CouplingVector] = []
    for omega in sorted(omegas):
        ops = {k: _interior_ops(comps[k], omega) for k in (1, 2)}
        for idx in range(Tj.n_retained):
            t = Tj.columns[:, idx]
            g = np.zeros(sys.n_global)
            g[sys.junction_global] = t
            for k in (1, 2):
                lu, Z_ij = ops[k]
                theta_i = -la.lu_solve(lu, Z_ij @ t)
                mp = sys.map_of(k)
                g[mp[comps[k].partition.interior]] = theta_i
            out.append(
                CouplingVector(
                    shape=g,
                    omega=omega,
                    rayleigh_root=rayleigh_root(g, K_g, M_g),
                    method="SVD",
                    source=idx,
                    singular_value=float(Tj.retained_singular_values[idx]),
                )
            )
    return out


# ---------------------------------------------------------------------------
# Gram-Schmidt against a base block
# ---------------------------------------------------------------------------


def _orthonormal_base(base: np.ndarray) -> np.ndarray:
    Q, _ = la.qr(base, mode="economic")
    return Q


def _prune_dependent(
    cols: np.ndarray, tags: list, drop_tol: float
) -> tuple[np.ndarray, list, list]:
    """Drop columns nearly dependent on their predecessors; normalize the rest.

    Kept columns stay in their original direction (unit Euclidean norm);
    only the accept/drop test uses the orthonormalized working set.
    """
    work: list[np.ndarray] = []
    kept_idx, dropped = [], []
    for idx in range(cols.shape[1]):
        v = cols[:, idx]
        pre = np.linalg.norm(v)
        if pre == 0.0:
            dropped.append(tags[idx])
            continue
        w = v.astype(float, copy=True)
        for _ in range(2):
            for q in work:
                w -= (q @ w) * q
        norm = np.linalg.norm(w)
        if norm < drop_tol * pre:
            dropped.append(tags[idx])
            continue
        work.append(w / norm)
        kept_idx.append(idx)
    kept = cols[:, kept_idx]
    kept = kept / np.linalg.norm(kept, axis=0)
    return kept, [tags[i] for i in kept_idx], dropped


def gram_schmidt_against(
    base: np.ndarray,
    candidates: Sequence[CouplingVector],
    drop_tol: float = 1e-8,
    base_tags: Optional[list] = None,
    candidate_tags: Optional[list] = None,
) -> ReductionBasis:
    """Append candidates to `base`, orthogonalized against the base block.

    Each accepted column is the candidate minus its projection on the
    base (two projection passes), normalized — candidates are *not*
    orthonormalized among themselves, so the returned condition number
    still reflects mutual near-dependence. A candidate is dropped when
    its residual against the base *and the previously accepted set*
    (modified Gram-Schmidt with reorthogonalization) falls below
    drop_tol times its original norm.
    """
    base = np.asarray(base, dtype=float)
    if candidate_tags is None:
        candidate_tags = [
            c.tag() if isinstance(c, CouplingVector) else None for c in candidates
        ]
    cand_cols = [
        c.shape if isinstance(c, CouplingVector) else np.asarray(c, dtype=float)
        for c in candidates
    ]
    if base_tags is None:
        base_tags = [
            FreeModeTag(component=0, index=i) for i in range(base.shape[1])
        ]

    Qb = _orthonormal_base(base) if base.shape[1] else base
    work = []  # orthonormal working set spanning accepted candidates (after base)
    kept_cols, kept_tags, dropped = [], [], []
    for vec, tag in zip(cand_cols, candidate_tags):
        pre = np.linalg.norm(vec)
        if pre == 0.0:
            dropped.append(tag)
            continue
        v = vec.astype(float, copy=True)
        for _ in range(2):
            if Qb.shape[1]:
                v -= Qb @ (Qb.T @ v)
        w = v.copy()
        for _ in range(2):
            for q in work:
                w -= (q @ w) * q
        if np.linalg.norm(w) < drop_tol * pre:
            dropped.append(tag)
            continue
        work.append(w / np.linalg.norm(w))
        kept_cols.append(v / np.linalg.norm(v))
        kept_tags.append(tag)

    if kept_cols:
        T = np.column_stack([base] + kept_cols) if base.shape[1] else np.column_stack(kept_cols)
    else:
        T = base
    return ReductionBasis(
        columns=T, tags=list(base_tags) + kept_tags, dropped=dropped
    )


# ---------------------------------------------------------------------------
# End-to-end method pipelines
# ---------------------------------------------------------------------------


@dataclass
class MethodBasisResult:
    basis: ReductionBasis
    free_modes: dict[int, ModeSet]
    coupling_vectors: list[CouplingVector]
    interface_basis: Optional[InterfaceBasis] = None


def assemble_method_basis(
    c1: ComponentModel,
    c2: ComponentModel,
    free_modes: dict[int, ModeSet],
    coupling_vectors: Sequence[CouplingVector],
    drop_tol: float = 1e-8,
) -> ReductionBasis:
    """[free modes | coupling vectors orthogonalized to them].

    The free-mode block is pruned for mutual dependence first (two full
    component mode sets over-span the global space once all modes are in
    the band), then the coupling vectors are appended through the
    Gram-Schmidt accept/drop pass.
    """
    sys = assemble(c1, c2)
    base, base_tags = free_mode_columns(sys, free_modes[1], free_modes[2], c1, c2)
    base, base_tags, dropped_base = _prune_dependent(base, base_tags, drop_tol)
    rb = gram_schmidt_against(
        base, list(coupling_vectors), drop_tol=drop_tol, base_tags=base_tags
    )
    rb.dropped = dropped_base + rb.dropped
    return rb


def build_cross_basis(
    c1: ComponentModel,
    c2: ComponentModel,
    band: BandSpec,
    omegas: Sequence[float],
    rayleigh_keep: int,
    include_rigid: bool = True,
    drop_tol: float = 1e-8,
    rayleigh_policy: Literal["smallest", "nearest"] = "smallest",
) -> MethodBasisResult:
    free = {
        c.id: solve_component_modes(c, band, include_rigid=include_rigid)
        for c in (c1, c2)
    }
    pool = cross_coupling_vectors(c1, c2, free, omegas)
    kept = filter_by_rayleigh(pool, band, rayleigh_keep, policy=rayleigh_policy)
    basis = assemble_method_basis(c1, c2, free, kept, drop_tol=drop_tol)
    return MethodBasisResult(basis=basis, free_modes=free, coupling_vectors=kept)


def build_svd_basis(
    c1: ComponentModel,
    c2: ComponentModel,
    band: BandSpec,
    omegas: Sequence[float],
    sv_threshold: float,
    include_rigid: bool = True,
    drop_tol: float = 1e-8,
) -> MethodBasisResult:
    free = {
        c.id: solve_component_modes(c, band, include_rigid=include_rigid)
        for c in (c1, c2)
    }
    Tj = svd_interface_basis(c1, c2, free[1], free[2], sv_threshold)
    vecs = svd_coupling_vectors(c1, c2, Tj, omegas)
    basis = assemble_method_basis(c1, c2, free, vecs, drop_tol=drop_tol)
    return MethodBasisResult(
        basis=basis, free_modes=free, coupling_vectors=vecs, interface_basis=Tj
    )
