"""Primal assembly of two components and the dynamic-stiffness split.

Displacement continuity on the shared interface is imposed strongly: each
matched junction DoF pair becomes a single global DoF, so the assembled
matrices are plain sums of component contributions. The elastic/interaction
split of the dynamic stiffness is kept in the stacked (duplicated-junction)
ordering [i1, j1, i2, j2] as a diagnostic; the assembled operator is the
primary object.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError
from .models import ComponentModel, check_coherence, dense


@dataclass
class AssembledSystem:
    """Primally assembled two-component system."""

    mass: np.ndarray
    stiffness: np.ndarray
    dof_map: tuple[np.ndarray, np.ndarray]  # per component: local -> global
    junction_global: np.ndarray
    n_global: int

    def map_of(self, component_id: int) -> np.ndarray:
        if component_id not in (1, 2):
            raise InvalidArgumentError(f"component id must be 1 or 2, got {component_id}")
        return self.dof_map[component_id - 1]


@dataclass
class DynamicStiffness:
    """Z(omega) = K - omega^2 M, optionally with its elastic/interaction split.

    When `split` is present it lives in the stacked unassembled ordering
    [i1, j1, i2, j2] (sizes in `stacked_blocks`); `matrix` is then the
    stacked sum Z_E + Z_I rather than the assembled operator.
    """

    omega: float
    matrix: np.ndarray
    split: Optional[tuple[np.ndarray, np.ndarray]] = None
    stacked_blocks: Optional[tuple[int, int, int, int]] = None


def build_dof_maps(
    c1: ComponentModel, c2: ComponentModel
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Deterministic local->global DoF maps for the primal assembly.

    Component 1 keeps its local numbering. Component 2's junction DoF are
    identified one-to-one (in partition order) with component 1's; its
    remaining DoF are appended in ascending local order.
    """
    check_coherence(c1, c2)
    n1, n2 = c1.n_dof, c2.n_dof
    j1, j2 = c1.partition.junction, c2.partition.junction

    map1 = np.arange(n1, dtype=np.int64)
    map2 = np.full(n2, -1, dtype=np.int64)
    map2[j2] = map1[j1]
    nxt = n1
    for d in range(n2):
        if map2[d] < 0:
            map2[d] = nxt
            nxt += 1
    junction_global = map1[j1]
    return map1, map2, junction_global, nxt


def assemble(c1: ComponentModel, c2: ComponentModel) -> AssembledSystem:
    """Sum component contributions onto shared junction DoF."""
    map1, map2, junction_global, n = build_dof_maps(c1, c2)
    M = np.zeros((n, n))
    K = np.zeros((n, n))
    for c, mp in ((c1, map1), (c2, map2)):
        ix = np.ix_(mp, mp)
        M[ix] += dense(c.mass)
        K[ix] += dense(c.stiffness)
    return AssembledSystem(
        mass=M,
        stiffness=K,
        dof_map=(map1, map2),
        junction_global=junction_global,
        n_global=n,
    )


def embed_vector(
    sys: AssembledSystem, component_id: int, local_vec: np.ndarray
) -> np.ndarray:
    """Scatter a component-local vector into a zero-padded global vector."""
    g = np.zeros(sys.n_global)
    g[sys.map_of(component_id)] = local_vec
    return g


def dynamic_stiffness(sys: AssembledSystem, omega: float) -> DynamicStiffness:
    """Assembled undamped dynamic stiffness K - omega^2 M."""
    if omega < 0:
        raise InvalidArgumentError(f"omega must be >= 0, got {omega}")
    return DynamicStiffness(omega=omega, matrix=sys.stiffness - omega**2 * sys.mass)


def split_elastic_interaction(
    c1: ComponentModel, c2: ComponentModel, omega: float
) -> DynamicStiffness:
    """Elastic/interaction split in the stacked ordering [i1, j1, i2, j2].

    Z_E is block diagonal with each component's own dynamic stiffness.
    Z_I carries the cross-component junction coupling: with displacement
    continuity, either duplicated junction row of Z_E + Z_I reproduces the
    assembled junction equation. Z_I is nonzero only in junction rows.
    """
    if omega < 0:
        raise InvalidArgumentError(f"omega must be >= 0, got {omega}")
    check_coherence(c1, c2)
    i1, j1 = c1.partition.interior, c1.partition.junction
    i2, j2 = c2.partition.interior, c2.partition.junction
    ni1, nj, ni2 = i1.size, j1.size, i2.size
    n = ni1 + nj + ni2 + nj

    Z1 = dense(c1.dynamic_stiffness(omega))
    Z2 = dense(c2.dynamic_stiffness(omega))
    perm1 = np.concatenate([i1, j1])
    perm2 = np.concatenate([i2, j2])

    ZE = np.zeros((n, n))
    ZE[: ni1 + nj, : ni1 + nj] = Z1[np.ix_(perm1, perm1)]
    ZE[ni1 + nj :, ni1 + nj :] = Z2[np.ix_(perm2, perm2)]

    # Stacked block slices
    sj1 = slice(ni1, ni1 + nj)
    si2 = slice(ni1 + nj, ni1 + nj + ni2)
    sj2 = slice(ni1 + nj + ni2, n)
    si1 = slice(0, ni1)

    ZI = np.zeros((n, n))
    ZI[sj1, sj1] = Z2[np.ix_(j2, j2)]
    ZI[sj1, si2] = Z2[np.ix_(j2, i2)]
    ZI[sj2, si1] = Z1[np.ix_(j1, i1)]
    ZI[sj2, sj2] = Z1[np.ix_(j1, j1)]

    return DynamicStiffness(
        omega=omega,
        matrix=ZE + ZI,
        split=(ZE, ZI),
        stacked_blocks=(ni1, nj, ni2, nj),
    )


def condense_stacked(
    dyn: DynamicStiffness, c1: ComponentModel, c2: ComponentModel
) -> np.ndarray:
    """Collapse the duplicated junction of a stacked operator.

    Keeps rows [i1, j1, i2], identifies the j2 columns with the j1 columns,
    and permutes the result back to the assembled global DoF ordering.
    Applied to Z_E + Z_I this reproduces the assembled dynamic stiffness.
    """
    if dyn.split is None or dyn.stacked_blocks is None:
        raise InvalidArgumentError("condense_stacked needs a split dynamic stiffness")
    ni1, nj, ni2, _ = dyn.stacked_blocks
    n_stacked = ni1 + 2 * nj + ni2
    n_cond = ni1 + nj + ni2

    # Continuity: stacked dof = L @ condensed dof, with j2 rows repeating j1.
    L = np.zeros((n_stacked, n_cond))
    L[: ni1 + nj + ni2, :] = np.eye(n_cond)
    L[ni1 + nj + ni2 :, ni1 : ni1 + nj] = np.eye(nj)

    keep_rows = np.arange(ni1 + nj + ni2)
    Zc = dyn.matrix[keep_rows, :] @ L

    # Stacked condensed ordering is [i1, j1, i2]; map it to the assembled
    # global ordering produced by build_dof_maps.
    map1, map2, _, n = build_dof_maps(c1, c2)
    stacked_to_global = np.concatenate(
        [
            map1[c1.partition.interior],
            map1[c1.partition.junction],
            map2[c2.partition.interior],
        ]
    )
    out = np.zeros((n, n))
    out[np.ix_(stacked_to_global, stacked_to_global)] = Zc
    return out
