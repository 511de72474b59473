"""A-posteriori residual-force indicator and Arnoldi enrichment with restart.

Each reduced solution whose indicator exceeds the tolerance is enriched by
a small shift-invert Krylov block targeted at its eigenvalue, seeded by
the static correction of its residual force. After every round the basis
is restarted as [free-free modes | current reduced shapes | new Arnoldi
vectors] so its size stays bounded.

Two indicator norms are available:

* ``paper``: eps_i = (R'K R) / ((K phi)' K (K phi)) — the force residual
  measured literally in the K inner product;
* ``flex`` (default): eps_i = (R' K^-1 R) / (phi' K phi) — the
  flexibility-weighted residual energy, consistent with displacement
  error norms. For a free-free stiffness the flexibility solve is
  shift-regularized with K + sigma*M, which is exact on Galerkin
  residuals as long as the rigid modes are in the basis.

Both values are computed on every call and appear in the reports.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np
import scipy.linalg as la

from .assembly import AssembledSystem
from .bases import ArnoldiTag, FreeModeTag, ReductionBasis, gram_schmidt_against
from .eigen import BandSpec, ModeSet, TWO_PI, solve_reduced
from .errors import InvalidArgumentError
from .models import dense

NormMode = Literal["flex", "paper"]


@dataclass(frozen=True)
class EnrichmentConfig:
    epsilon_tol: float
    arnoldi_per_mode: int = 3
    max_rounds: int = 5
    norm_mode: NormMode = "flex"

    def __post_init__(self):
        if self.epsilon_tol <= 0:
            raise InvalidArgumentError("epsilon_tol must be > 0")
        if self.arnoldi_per_mode < 1:
            raise InvalidArgumentError("arnoldi_per_mode must be >= 1")
        if self.max_rounds < 1:
            raise InvalidArgumentError("max_rounds must be >= 1")
        if self.norm_mode not in ("flex", "paper"):
            raise InvalidArgumentError(f"unknown norm mode {self.norm_mode!r}")


@dataclass
class ModeIndicator:
    index: int
    frequency: float
    epsilon: float
    epsilon_flex: float
    epsilon_paper: float
    flagged: bool


@dataclass
class IndicatorReport:
    per_mode: list[ModeIndicator]
    tolerance: float
    norm_mode: str
    regularized: bool = False
    shift: float = 0.0

    @property
    def flagged(self) -> list[int]:
        return [m.index for m in self.per_mode if m.flagged]

    @property
    def max_epsilon(self) -> float:
        return max((m.epsilon for m in self.per_mode), default=0.0)


@dataclass
class EnrichmentResult:
    basis: ReductionBasis
    reports: list[IndicatorReport]
    converged: bool

    @property
    def rounds(self) -> int:
        return len(self.reports)


def residual_force(sys: AssembledSystem, frequency: float, shape: np.ndarray) -> np.ndarray:
    """R_f = (K - (2 pi f)^2 M) phi for an approximate eigenpair."""
    shape = np.asarray(shape, dtype=float)
    if not np.any(shape):
        raise InvalidArgumentError("residual force of a zero shape")
    omega2 = (TWO_PI * frequency) ** 2
    return dense(sys.stiffness) @ shape - omega2 * (dense(sys.mass) @ shape)


def _stiffness_solver(sys: AssembledSystem):
    """Cholesky of K, shift-regularized by sigma*M when K is semi-definite."""
    K = dense(sys.stiffness)
    M = dense(sys.mass)
    try:
        cho = la.cho_factor(K)
        return cho, False, 0.0
    except la.LinAlgError:
        sigma = 0.01 * float(np.mean(np.diag(K) / np.diag(M)))
        cho = la.cho_factor(K + sigma * M)
        return cho, True, sigma


def indicator(
    sys: AssembledSystem, modes: ModeSet, cfg: EnrichmentConfig
) -> IndicatorReport:
    """Residual-force quality indicator for every mode of a reduced solution."""
    K = dense(sys.stiffness)
    cho, regularized, sigma = _stiffness_solver(sys)
    entries = []
    for i in range(modes.n_modes):
        phi = modes.shapes[:, i]
        f = float(modes.frequencies[i])
        R = residual_force(sys, f, phi)

        K_phi = K @ phi
        den_flex = float(phi @ K_phi)
        den_paper = float(K_phi @ (K @ K_phi))
        num_flex = float(R @ la.cho_solve(cho, R))
        num_paper = float(R @ (K @ R))

        # A rigid mode contained in the basis has both numerator and
        # denominator at roundoff level; call it converged rather than 0/0.
        scale = float(phi @ phi) * np.abs(K).max()
        eps_flex = _safe_ratio(num_flex, den_flex, scale)
        eps_paper = _safe_ratio(num_paper, den_paper, scale * np.abs(K).max() ** 2)

        eps = eps_flex if cfg.norm_mode == "flex" else eps_paper
        entries.append(
            ModeIndicator(
                index=i,
                frequency=f,
                epsilon=eps,
                epsilon_flex=eps_flex,
                epsilon_paper=eps_paper,
                flagged=bool(eps > cfg.epsilon_tol),
            )
        )
    return IndicatorReport(
        per_mode=entries,
        tolerance=cfg.epsilon_tol,
        norm_mode=cfg.norm_mode,
        regularized=regularized,
        shift=sigma,
    )


def _safe_ratio(num: float, den: float, scale: float) -> float:
    """num/den with the 0/0 of an exactly-captured rigid mode mapped to 0."""
    if den > 1e-300 and den > 1e-14 * scale:
        return max(num, 0.0) / den
    return 0.0 if abs(num) <= 1e-14 * scale else float("inf")


def _orthonormal_columns(cols: np.ndarray, tol: float = 1e-10) -> list[np.ndarray]:
    """Rank-safe orthonormal spanning set of the given columns (MGS)."""
    out: list[np.ndarray] = []
    for k in range(cols.shape[1]):
        v = cols[:, k].astype(float, copy=True)
        pre = np.linalg.norm(v)
        if pre == 0.0:
            continue
        for _ in range(2):
            for q in out:
                v -= (q @ v) * q
        norm = np.linalg.norm(v)
        if norm > tol * pre:
            out.append(v / norm)
    return out


def _arnoldi_block(
    K: np.ndarray,
    M: np.ndarray,
    sigma: float,
    seed_residual: np.ndarray,
    n_vectors: int,
    ortho_against: list[np.ndarray],
) -> list[np.ndarray]:
    """New basis directions from the Krylov space of (K - sigma M)^-1 M.

    The recurrence starts at the residual displacement (K - sigma M)^-1 R;
    with sigma equal to the Ritz value that seed *is* the Ritz shape, so
    the novel content arrives with the subsequent operator applications.
    Each recurrence vector's component outside `ortho_against` (and the
    block built so far) is collected, up to n_vectors of them.
    """
    A = K - sigma * M
    with warnings.catch_warnings():
        # Singularity is probed explicitly below; silence scipy's warning.
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu = la.lu_factor(A)
    # Singular-shift guard: sigma landing on an eigenvalue makes the LU
    # factor collapse; nudge by +0.5% (of the mass scale when sigma == 0).
    u_diag = np.abs(np.diag(lu[0]))
    if u_diag.min() < 1e-12 * u_diag.max():
        scale = float(np.mean(np.diag(K) / np.diag(M)))
        sigma = sigma * 1.005 + 0.005 * scale * (sigma == 0.0)
        warnings.warn(
            f"enrichment shift nudged to {sigma:.6g}: factorization was "
            "near-singular",
            stacklevel=2,
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", la.LinAlgWarning)
            lu = la.lu_factor(K - sigma * M)

    block: list[np.ndarray] = []
    krylov: list[np.ndarray] = []  # orthonormal Arnoldi recurrence vectors
    q = la.lu_solve(lu, seed_residual)
    for _ in range(2 * (n_vectors + 1)):
        pre = np.linalg.norm(q)
        if pre == 0.0:
            break
        # Arnoldi step: orthonormalize within the recurrence sequence.
        for _ in range(2):
            for p in krylov:
                q -= (p @ q) * p
        norm = np.linalg.norm(q)
        if norm < 1e-12 * pre:
            break  # Krylov subspace exhausted
        q = q / norm
        krylov.append(q)

        # Collect whatever this direction adds beyond the existing basis.
        w = q.copy()
        for _ in range(2):
            for p in ortho_against:
                w -= (p @ w) * p
            for p in block:
                w -= (p @ w) * p
        wn = np.linalg.norm(w)
        if wn > 1e-10:
            block.append(w / wn)
            if len(block) >= n_vectors:
                break
        q = la.lu_solve(lu, M @ q)
    return block


def enrich(
    sys: AssembledSystem,
    T0: ReductionBasis,
    band: BandSpec,
    cfg: EnrichmentConfig,
) -> EnrichmentResult:
    """Indicator-driven Arnoldi enrichment of a reduction basis.

    Rounds run until no in-band solution is flagged or max_rounds is
    reached; each restart rebuilds the basis as [free-free columns of T0 |
    reduced shapes | new Arnoldi vectors], Gram-Schmidt orthogonalized.
    """
    K = dense(sys.stiffness)
    M = dense(sys.mass)

    free_idx = [i for i, t in enumerate(T0.tags) if t.kind == "free_free_mode"]
    if free_idx:
        free_cols = T0.columns[:, free_idx]
        free_tags = [T0.tags[i] for i in free_idx]
    else:
        free_cols = T0.columns
        free_tags = list(T0.tags)

    T = T0
    reports: list[IndicatorReport] = []
    for round_no in range(1, cfg.max_rounds + 1):
        modes = solve_reduced(T, sys, band)
        report = indicator(sys, modes, cfg)
        reports.append(report)
        if not report.flagged:
            return EnrichmentResult(basis=T, reports=reports, converged=True)
        if round_no == cfg.max_rounds:
            break

        # Shared orthonormal scaffold for the new Krylov blocks (rank-safe:
        # the shapes live inside span(T), which may overlap the free block).
        scaffold = _orthonormal_columns(
            np.column_stack([free_cols, modes.shapes])
        )

        candidates: list[np.ndarray] = []
        tags: list = []
        for i in report.flagged:
            f_i = float(modes.frequencies[i])
            sigma = (TWO_PI * f_i) ** 2
            R = residual_force(sys, f_i, modes.shapes[:, i])
            block = _arnoldi_block(
                K, M, sigma, R, cfg.arnoldi_per_mode, scaffold + candidates
            )
            candidates.extend(block)
            tags.extend(
                ArnoldiTag(target_mode=i, step=s + 1) for s in range(len(block))
            )

        restart_cols = [modes.shapes[:, k] for k in range(modes.n_modes)]
        restart_tags = [
            ArnoldiTag(target_mode=k, step=0) for k in range(modes.n_modes)
        ]
        T = gram_schmidt_against(
            free_cols,
            restart_cols + candidates,
            base_tags=free_tags,
            candidate_tags=restart_tags + tags,
        )

    return EnrichmentResult(basis=T, reports=reports, converged=False)
