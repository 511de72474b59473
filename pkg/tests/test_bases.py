"""Reduction-basis construction tests.

Independent oracles used here: hand-solved static condensation on the
chain, SVD rank counting for the Gram-Schmidt survivor test, and
principal angles between subspaces for the static-limit equivalence.
"""
import warnings

import numpy as np
import pytest
import scipy.linalg as la

import ffcms as f
from ffcms.bases import free_mode_columns
from ffcms.errors import (
    EmptyBasisError,
    InvalidArgumentError,
    NearSingularityError,
)
from ffcms.models import dense


# ---------------------------------------------------------------------------
# Craig-Bampton
# ---------------------------------------------------------------------------


def test_constraint_mode_count_equals_junction_dof(box_pair, box_band):
    c1, c2 = box_pair
    basis = f.craig_bampton_basis(c1, c2, box_band)
    n_constraint = sum(1 for t in basis.tags if t.kind == "constraint_mode")
    assert n_constraint == c1.n_junction


def test_chain_constraint_mode_is_the_static_follow(chain_pair):
    """Hand-solved static condensation: a free-standing chain whose only
    junction DoF moves by one unit follows rigidly (zero strain), so the
    constraint mode is constant along both chains — which is also the
    assembled rigid-body vector."""
    c1, c2 = chain_pair
    sys = f.assemble(c1, c2)
    psi, _ = f.constraint_modes(c1, c2, sys)
    assert psi.shape[1] == 1
    assert np.allclose(psi[:, 0], np.ones(sys.n_global), atol=1e-12)
    # Direct oracle: solve K_ii u = -K_ij on component 1 by hand.
    K_ii, K_ij, _ = c1.submatrices("stiffness")
    u = np.linalg.solve(K_ii, -K_ij[:, 0])
    assert np.allclose(u, np.ones(c1.n_dof - 1), atol=1e-12)


def test_cb_full_band_reproduces_chain_spectrum(chain_pair, chain_system, chain_band):
    c1, c2 = chain_pair
    basis = f.craig_bampton_basis(c1, c2, chain_band)
    full = f.solve_modes(chain_system.mass, chain_system.stiffness, chain_band)
    red = f.solve_reduced(basis, chain_system, chain_band)
    el = full.rigid_count
    rel = np.abs(red.frequencies[el:] - full.frequencies[el:]) / full.frequencies[el:]
    assert rel.max() < 1e-6


# ---------------------------------------------------------------------------
# Cross coupling vectors
# ---------------------------------------------------------------------------


def test_cross_at_zero_matches_static_condensation(chain_pair):
    """A rigid donor trace at omega = 0 must reproduce the constraint mode."""
    c1, c2 = chain_pair
    sys = f.assemble(c1, c2)
    free = {c.id: f.solve_component_modes(c, f.BandSpec(0.0, 1.0)) for c in (c1, c2)}
    vecs = f.cross_coupling_vectors(c1, c2, free, [0.0])
    psi, _ = f.constraint_modes(c1, c2, sys)

    # Receiver 1, donor = rigid mode of component 2 (index 0): junction
    # trace is a constant, so the receiving interior is the static ramp.
    v = next(x for x in vecs if x.receiver == 1 and x.source == 0)
    trace = v.shape[sys.junction_global[0]]
    expected = psi[:, 0] * trace
    got = v.shape.copy()
    got[sys.map_of(2)[c2.partition.interior]] = 0.0  # receiver-1 vector already zero there
    assert np.allclose(
        got[sys.map_of(1)], expected[sys.map_of(1)], rtol=1e-10, atol=1e-12
    )


def test_rayleigh_root_of_eigenvector_is_its_frequency(box_pair):
    c1, _ = box_pair
    ms = f.solve_component_modes(c1, f.BandSpec(0.0, 1e6))
    K, M = dense(c1.stiffness), dense(c1.mass)
    for i in range(ms.rigid_count, ms.n_modes):
        r = f.rayleigh_root(ms.shapes[:, i], K, M)
        assert np.isclose(r, 2 * np.pi * ms.frequencies[i], rtol=1e-10)


def test_rayleigh_root_scale_invariance(box_pair):
    c1, _ = box_pair
    K, M = dense(c1.stiffness), dense(c1.mass)
    rng = np.random.default_rng(3)
    v = rng.standard_normal(c1.n_dof)
    r0 = f.rayleigh_root(v, K, M)
    for alpha in (2.0, -0.5, 1e-6, 3e7):
        assert np.isclose(f.rayleigh_root(alpha * v, K, M), r0, rtol=1e-12)


def test_cross_chain_produces_two_vectors_per_omega(chain_pair):
    c1, c2 = chain_pair
    band = f.BandSpec(0.0, 0.05)  # rigid + first elastic per component
    free = {c.id: f.solve_component_modes(c, band) for c in (c1, c2)}
    vecs = f.cross_coupling_vectors(c1, c2, free, [0.0])
    assert len(vecs) == free[1].n_modes + free[2].n_modes
    receivers = {v.receiver for v in vecs}
    assert receivers == {1, 2}


def test_cross_refuses_omega_on_fixed_interface_resonance(chain_pair):
    c1, c2 = chain_pair
    fixed = f.solve_fixed_interface_modes(c1, f.BandSpec(0.0, 1.0))
    bad_omega = 2 * np.pi * fixed.frequencies[0]
    band = f.BandSpec(0.0, 1.0)
    free = {c.id: f.solve_component_modes(c, band) for c in (c1, c2)}
    with pytest.raises(NearSingularityError, match="component"):
        f.cross_coupling_vectors(c1, c2, free, [bad_omega])


# ---------------------------------------------------------------------------
# Rayleigh filtering
# ---------------------------------------------------------------------------


def _fake_vector(r, omega=0.0, source=0):
    return f.CouplingVector(
        shape=np.ones(3), omega=omega, rayleigh_root=r, method="CROSS", source=source
    )


def test_filter_keep_all_is_identity_up_to_order():
    vecs = [_fake_vector(r, source=i) for i, r in enumerate([5.0, 1.0, 3.0])]
    out = f.filter_by_rayleigh(vecs, f.BandSpec(0.0, 1.0), keep=3)
    assert [v.rayleigh_root for v in out] == [1.0, 3.0, 5.0]
    assert {v.source for v in out} == {0, 1, 2}


def test_filter_prefers_band_proximity():
    near = _fake_vector(2 * np.pi * 100.0)
    far = _fake_vector(2 * np.pi * 1e6, source=1)
    out = f.filter_by_rayleigh([far, near], f.BandSpec(0.0, 3000.0), keep=1)
    assert out == [near]


def test_filter_warns_when_asking_for_too_many():
    vecs = [_fake_vector(1.0), _fake_vector(2.0, source=1)]
    with pytest.warns(UserWarning, match="only 2"):
        out = f.filter_by_rayleigh(vecs, f.BandSpec(0.0, 1.0), keep=10)
    assert len(out) == 2


def test_filter_nearest_policy_targets_the_band():
    below = _fake_vector(1.0)             # far below the band
    inside = _fake_vector(70.0, source=1)  # inside
    above = _fake_vector(2000.0, source=2)  # far above
    band = f.BandSpec(10.0, 12.0)  # [62.8, 75.4] rad/s
    out = f.filter_by_rayleigh([below, inside, above], band, keep=1, policy="nearest")
    assert out == [inside]


# ---------------------------------------------------------------------------
# SVD interface basis
# ---------------------------------------------------------------------------


def test_identical_traces_give_sqrt_two_singular_value(small_box_pair):
    c1, c2 = small_box_pair
    nj = c1.n_junction
    trace = np.zeros(c1.n_dof)
    trace[c1.partition.junction] = np.arange(1.0, nj + 1)
    trace /= np.linalg.norm(trace)
    ms1 = f.ModeSet(np.array([1.0]), trace.reshape(-1, 1), "component1", 0)
    trace2 = np.zeros(c2.n_dof)
    trace2[c2.partition.junction] = np.arange(1.0, nj + 1)
    trace2 /= np.linalg.norm(trace2)
    ms2 = f.ModeSet(np.array([1.0]), trace2.reshape(-1, 1), "component2", 0)
    Tj = f.svd_interface_basis(c1, c2, ms1, ms2, sv_threshold=0.1)
    assert Tj.n_retained == 1
    assert np.isclose(Tj.singular_values[0], np.sqrt(2.0), rtol=1e-12)


def test_orthonormal_disjoint_traces_are_reproduced(small_box_pair):
    c1, c2 = small_box_pair
    nj = c1.n_junction
    shapes1 = np.zeros((c1.n_dof, 3))
    shapes2 = np.zeros((c2.n_dof, 3))
    for k in range(3):
        shapes1[c1.partition.junction[2 * k], k] = 1.0
        shapes2[c2.partition.junction[2 * k + 1], k] = 1.0
    ms1 = f.ModeSet(np.arange(1.0, 4.0), shapes1, "component1", 0)
    ms2 = f.ModeSet(np.arange(1.0, 4.0), shapes2, "component2", 0)
    Tj = f.svd_interface_basis(c1, c2, ms1, ms2, sv_threshold=0.5)
    assert Tj.n_retained == 6
    # All six injected directions lie in the span
    A = np.column_stack([shapes1[c1.partition.junction], shapes2[c2.partition.junction]])
    proj = Tj.columns @ (Tj.columns.T @ A)
    assert np.allclose(proj, A, atol=1e-12)


def test_all_singular_values_below_threshold_is_an_error(small_box_pair):
    c1, c2 = small_box_pair
    band = f.BandSpec(0.0, 1e7)
    m1 = f.solve_component_modes(c1, band)
    m2 = f.solve_component_modes(c2, band)
    with pytest.raises(EmptyBasisError):
        f.svd_interface_basis(c1, c2, m1, m2, sv_threshold=1e9)


def test_interface_basis_is_orthonormal_and_descending(box_pair, box_band):
    c1, c2 = box_pair
    m1 = f.solve_component_modes(c1, box_band)
    m2 = f.solve_component_modes(c2, box_band)
    Tj = f.svd_interface_basis(c1, c2, m1, m2, sv_threshold=0.2)
    G = Tj.columns.T @ Tj.columns
    assert np.abs(G - np.eye(G.shape[0])).max() < 1e-10
    assert np.all(np.diff(Tj.singular_values) <= 0)
    assert np.all(Tj.singular_values >= 0)


# ---------------------------------------------------------------------------
# SVD coupling vectors
# ---------------------------------------------------------------------------


def test_svd_vectors_at_zero_span_constraint_modes(small_box_pair):
    c1, c2 = small_box_pair
    sys = f.assemble(c1, c2)
    nj = c1.n_junction
    Tj = f.InterfaceBasis(
        columns=np.eye(nj), singular_values=np.ones(nj), threshold=0.0
    )
    vecs = f.svd_coupling_vectors(c1, c2, Tj, [0.0])
    V = np.column_stack([v.shape for v in vecs])
    psi, _ = f.constraint_modes(c1, c2, sys)
    angles = la.subspace_angles(V, psi)
    assert angles.max() < 1e-8


def test_svd_vector_count_is_directions_times_omegas(box_pair, box_band):
    c1, c2 = box_pair
    m1 = f.solve_component_modes(c1, box_band)
    m2 = f.solve_component_modes(c2, box_band)
    Tj = f.svd_interface_basis(c1, c2, m1, m2, sv_threshold=0.2)
    omegas = [0.0, 500.0, 1000.0]
    vecs = f.svd_coupling_vectors(c1, c2, Tj, omegas)
    assert len(vecs) == Tj.n_retained * len(omegas)


def test_chain_svd_vector_is_the_static_ramp(chain_pair):
    c1, c2 = chain_pair
    sys = f.assemble(c1, c2)
    Tj = f.InterfaceBasis(
        columns=np.eye(1), singular_values=np.ones(1), threshold=0.0
    )
    vecs = f.svd_coupling_vectors(c1, c2, Tj, [0.0])
    psi, _ = f.constraint_modes(c1, c2, sys)
    assert np.abs(vecs[0].shape - psi[:, 0]).max() < 1e-12


# ---------------------------------------------------------------------------
# Gram-Schmidt
# ---------------------------------------------------------------------------


def _random_orthonormal(n, m, rng):
    Q, _ = np.linalg.qr(rng.standard_normal((n, m)))
    return Q


def test_candidate_inside_base_span_is_dropped():
    rng = np.random.default_rng(0)
    base = _random_orthonormal(30, 5, rng)
    cand = base @ rng.standard_normal(5)
    rb = f.gram_schmidt_against(base, [cand])
    assert rb.n_columns == 5
    assert len(rb.dropped) == 1


def test_orthogonal_candidate_survives_unchanged():
    rng = np.random.default_rng(1)
    Q = _random_orthonormal(30, 6, rng)
    base, extra = Q[:, :5], Q[:, 5]
    rb = f.gram_schmidt_against(base, [3.7 * extra])
    assert rb.n_columns == 6
    assert np.allclose(np.abs(rb.columns[:, 5]), np.abs(extra), atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_exactly_complement_rank_candidates_survive(seed):
    """100 candidates drawn from a 10-dimensional complement: the accepted
    count must equal the SVD rank of the candidate family."""
    rng = np.random.default_rng(seed)
    n, nb, nc = 40, 7, 10
    Q = _random_orthonormal(n, nb + nc, rng)
    base = Q[:, :nb]
    comp = Q[:, nb:]
    cands = [comp @ rng.standard_normal(nc) for _ in range(100)]
    rank = np.linalg.matrix_rank(np.column_stack(cands), tol=1e-10)
    assert rank == nc  # oracle: the family really spans the complement
    rb = f.gram_schmidt_against(base, cands, drop_tol=1e-8)
    assert rb.n_columns == nb + nc
    assert len(rb.dropped) == 100 - nc


def test_gram_schmidt_idempotence(box_pair, box_band):
    c1, c2 = box_pair
    res = f.build_svd_basis(
        c1, c2, box_band, [0.0, 1000.0], sv_threshold=0.2
    )
    basis = res.basis
    n_free = sum(1 for t in basis.tags if t.kind == "free_free_mode")
    base = basis.columns[:, :n_free]
    cands = [basis.columns[:, k] for k in range(n_free, basis.n_columns)]
    again = f.gram_schmidt_against(base, cands, base_tags=basis.tags[:n_free],
                                   candidate_tags=basis.tags[n_free:])
    assert again.n_columns == basis.n_columns
    assert not [t for t in again.dropped if t is not None]
    assert np.abs(again.columns - basis.columns).max() < 1e-12


def test_basis_tags_align_with_columns(box_pair, box_band):
    c1, c2 = box_pair
    res = f.build_svd_basis(c1, c2, box_band, [0.0], sv_threshold=0.2)
    basis = res.basis
    assert len(basis.tags) == basis.n_columns
    kinds = {t.kind for t in basis.tags}
    assert kinds == {"free_free_mode", "coupling_vector"}


def test_static_limit_subspace_equivalence(small_box_pair):
    """Full-junction SVD coupling at omega 0 spans the CB constraint space."""
    c1, c2 = small_box_pair
    sys = f.assemble(c1, c2)
    band = f.BandSpec(0.0, 1e7)
    free = {c.id: f.solve_component_modes(c, band) for c in (c1, c2)}
    nj = c1.n_junction
    Tj = f.InterfaceBasis(np.eye(nj), np.ones(nj), 0.0)
    vecs = f.svd_coupling_vectors(c1, c2, Tj, [0.0])
    V = np.column_stack([v.shape for v in vecs])
    psi, _ = f.constraint_modes(c1, c2, sys)
    assert la.subspace_angles(V, psi).max() < 1e-8


def test_method_bases_satisfy_rayleigh_ritz(box_pair, box_system, box_band):
    c1, c2 = box_pair
    full = f.solve_modes(box_system.mass, box_system.stiffness, box_band)
    for build in (
        lambda: f.build_svd_basis(c1, c2, box_band, [0.0], sv_threshold=0.2).basis,
        lambda: f.craig_bampton_basis(c1, c2, box_band),
    ):
        red = f.solve_reduced(build(), box_system, box_band)
        n = min(red.n_modes, full.n_modes)
        assert np.all(
            red.frequencies[:n] >= full.frequencies[:n] * (1 - 1e-10)
        )
