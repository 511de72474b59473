"""Primal assembly and dynamic-stiffness split tests."""
import numpy as np
import pytest

import ffcms as f
from ffcms.assembly import build_dof_maps, condense_stacked, embed_vector
from ffcms.errors import InterfaceIncoherenceError, InvalidArgumentError
from ffcms.models import chain_frequencies_free, dense


def test_two_small_chains_share_one_dof(unit_material):
    c1, c2 = f.build_chain_pair(2, 2, unit_material)
    sys = f.assemble(c1, c2)
    assert sys.n_global == 5
    g = sys.junction_global[0]
    K1 = dense(c1.stiffness)
    K2 = dense(c2.stiffness)
    j1 = c1.partition.junction[0]
    j2 = c2.partition.junction[0]
    assert sys.stiffness[g, g] == K1[j1, j1] + K2[j2, j2]


def test_assembled_box_pair_keeps_six_rigid_modes(box_system):
    w = np.linalg.eigvalsh(box_system.stiffness)
    assert np.sum(np.abs(w) < 1e-9 * w[-1]) == 6


def test_assembled_chains_match_long_chain_spectrum(chain_system):
    ms = f.solve_modes(chain_system.mass, chain_system.stiffness, f.BandSpec(0.0, 1.0))
    exact = chain_frequencies_free(20, 1.0, 1.0)
    rel = np.abs(ms.frequencies[1:] - exact[1:]) / exact[1:]
    assert rel.max() < 1e-8


def test_assemble_rejects_junction_length_mismatch(chain_pair, steel):
    c1, _ = chain_pair
    b1, _ = f.build_box_pair((1, 1, 1), (1, 1, 1), steel)
    with pytest.raises(InterfaceIncoherenceError):
        f.assemble(c1, b1)


def test_assemble_is_commutative_up_to_permutation(box_pair):
    c1, c2 = box_pair
    s12 = f.assemble(c1, c2)
    s21 = f.assemble(c2, c1)
    w12 = np.linalg.eigvalsh(s12.stiffness)
    w21 = np.linalg.eigvalsh(s21.stiffness)
    # rigid eigenvalues are roundoff-level; measure them against the spectrum
    assert np.allclose(w12, w21, rtol=1e-10, atol=1e-10 * w12[-1])


def test_dof_maps_are_invertible_on_their_range(box_pair):
    c1, c2 = box_pair
    map1, map2, junction, n = build_dof_maps(c1, c2)
    assert set(map1) | set(map2) == set(range(n))
    assert np.unique(map1).size == map1.size
    assert np.unique(map2).size == map2.size


def test_embed_vector_scatters_to_component_slots(chain_system, chain_pair):
    c1, _ = chain_pair
    v = np.arange(1.0, c1.n_dof + 1)
    g = embed_vector(chain_system, 1, v)
    assert np.array_equal(g[chain_system.map_of(1)], v)
    mask = np.ones(chain_system.n_global, bool)
    mask[chain_system.map_of(1)] = False
    assert np.all(g[mask] == 0.0)


# ---------------------------------------------------------------------------
# Dynamic stiffness
# ---------------------------------------------------------------------------


def test_dynamic_stiffness_at_zero_is_stiffness(chain_system):
    dyn = f.dynamic_stiffness(chain_system, 0.0)
    assert np.array_equal(dyn.matrix, chain_system.stiffness)


def test_dynamic_stiffness_annihilates_eigenpairs(chain_system):
    ms = f.solve_modes(chain_system.mass, chain_system.stiffness, f.BandSpec(0.0, 1.0))
    i = ms.rigid_count + 2
    omega = 2 * np.pi * ms.frequencies[i]
    phi = ms.shapes[:, i]
    dyn = f.dynamic_stiffness(chain_system, omega)
    assert np.linalg.norm(dyn.matrix @ phi) <= 1e-8 * np.linalg.norm(
        chain_system.stiffness @ phi
    )


def test_dynamic_stiffness_is_plain_arithmetic():
    rng = np.random.default_rng(42)
    A = rng.standard_normal((5, 5))
    M = A @ A.T + 5 * np.eye(5)
    B = rng.standard_normal((5, 5))
    K = B @ B.T + 5 * np.eye(5)
    part = f.DofPartition(interior=np.arange(4), junction=np.array([4]))
    c = f.ComponentModel(id=1, mass=M, stiffness=K, partition=part)
    assert np.array_equal(c.dynamic_stiffness(2.0), K - 4.0 * M)


def test_dynamic_stiffness_rejects_negative_omega(chain_system):
    with pytest.raises(InvalidArgumentError):
        f.dynamic_stiffness(chain_system, -1.0)


# ---------------------------------------------------------------------------
# Elastic / interaction split
# ---------------------------------------------------------------------------


def test_split_interaction_zero_outside_junction_rows(box_pair):
    c1, c2 = box_pair
    dyn = f.split_elastic_interaction(c1, c2, omega=100.0)
    _, ZI = dyn.split
    ni1, nj, ni2, _ = dyn.stacked_blocks
    junction_rows = np.r_[ni1 : ni1 + nj, ni1 + nj + ni2 : ni1 + 2 * nj + ni2]
    mask = np.zeros(ZI.shape[0], bool)
    mask[junction_rows] = True
    assert np.abs(ZI[~mask, :]).max() == 0.0


def test_split_elastic_is_block_diagonal(box_pair):
    c1, c2 = box_pair
    dyn = f.split_elastic_interaction(c1, c2, omega=50.0)
    ZE, _ = dyn.split
    n1 = c1.n_dof
    assert np.abs(ZE[:n1, n1:]).max() == 0.0
    assert np.abs(ZE[n1:, :n1]).max() == 0.0


def test_split_condenses_to_assembled_operator(chain_pair):
    c1, c2 = chain_pair
    sys = f.assemble(c1, c2)
    dyn = f.split_elastic_interaction(c1, c2, omega=0.0)
    Zc = condense_stacked(dyn, c1, c2)
    assert np.abs(Zc - sys.stiffness).max() < 1e-12 * np.abs(sys.stiffness).max()


def test_split_condenses_at_nonzero_omega(box_pair):
    c1, c2 = box_pair
    sys = f.assemble(c1, c2)
    omega = 321.0
    dyn = f.split_elastic_interaction(c1, c2, omega)
    Zc = condense_stacked(dyn, c1, c2)
    Z = f.dynamic_stiffness(sys, omega).matrix
    assert np.abs(Zc - Z).max() < 1e-12 * np.abs(Z).max()


def test_split_sum_is_exact(box_pair):
    c1, c2 = box_pair
    dyn = f.split_elastic_interaction(c1, c2, omega=77.0)
    ZE, ZI = dyn.split
    assert np.array_equal(ZE + ZI, dyn.matrix)


# ---------------------------------------------------------------------------
# Invariants
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("omega", [0.0, 10.0, 1234.5])
def test_assembled_dynamic_stiffness_is_symmetric(box_system, omega):
    Z = f.dynamic_stiffness(box_system, omega).matrix
    assert np.abs(Z - Z.T).max() == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_energy_consistency(chain_system, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(chain_system.n_global)
    omega = rng.uniform(0.0, 5.0)
    Z = f.dynamic_stiffness(chain_system, omega).matrix
    lhs = u @ Z @ u
    rhs = u @ chain_system.stiffness @ u - omega**2 * (u @ chain_system.mass @ u)
    assert np.isclose(lhs, rhs, rtol=1e-12)
