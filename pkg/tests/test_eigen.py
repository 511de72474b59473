"""Eigensolver tests: analytic spectra, normalization, reduced solves."""
import numpy as np
import pytest

import ffcms as f
from ffcms.eigen import basis_condition_number, canonicalize_signs
from ffcms.errors import ConditioningError, DefinitenessError, InvalidArgumentError
from ffcms.models import (
    chain_frequencies_fixed,
    chain_frequencies_free,
    dense,
    rigid_body_vectors,
)


def test_two_mass_chain_has_textbook_frequencies():
    # one element, two unit masses of m/2 each... use explicit 2-DoF system
    M = np.diag([1.0, 1.0])
    K = np.array([[1.0, -1.0], [-1.0, 1.0]])
    ms = f.solve_modes(M, K, f.BandSpec(0.0, 1.0))
    assert ms.rigid_count == 1
    assert ms.frequencies[0] == 0.0
    assert np.isclose(ms.frequencies[1], np.sqrt(2.0) / (2 * np.pi), rtol=1e-12)


def test_box_rigid_modes_span_geometric_rigid_vectors(small_box_pair):
    c1, _ = small_box_pair
    ms = f.solve_component_modes(c1, f.BandSpec(0.0, 1e7))
    assert ms.rigid_count == 6
    R = rigid_body_vectors(c1)
    computed = ms.shapes[:, :6]
    # Subspace MAC: projection of each geometric vector onto the span
    Q, _ = np.linalg.qr(computed)
    for k in range(6):
        v = R[:, k] / np.linalg.norm(R[:, k])
        proj = Q @ (Q.T @ v)
        assert np.linalg.norm(proj) ** 2 >= 0.999


def test_chain_elastic_frequencies_match_formula(chain_pair):
    c1, _ = chain_pair
    ms = f.solve_component_modes(c1, f.BandSpec(0.0, 1.0))
    exact = chain_frequencies_free(10, 1.0, 1.0)
    rel = np.abs(ms.frequencies[1:6] - exact[1:6]) / exact[1:6]
    assert rel.max() < 1e-8


def test_mass_orthonormality_and_stiffness_orthogonality(box_pair):
    c1, _ = box_pair
    M, K = dense(c1.mass), dense(c1.stiffness)
    ms = f.solve_component_modes(c1, f.BandSpec(0.0, 1e6), max_modes=30)
    G = ms.shapes.T @ M @ ms.shapes
    assert np.abs(G - np.eye(G.shape[0])).max() < 1e-8
    S = ms.shapes.T @ K @ ms.shapes
    off = S - np.diag(np.diag(S))
    assert np.abs(off).max() < 1e-6 * np.diag(S).max()
    omega2 = (2 * np.pi * ms.frequencies) ** 2
    elastic = ms.rigid_count
    assert np.allclose(
        np.diag(S)[elastic:], omega2[elastic:], rtol=1e-8
    )


def test_solve_modes_rejects_indefinite_mass():
    with pytest.raises(DefinitenessError):
        f.solve_modes(np.diag([1.0, -1.0]), np.eye(2), f.BandSpec(0.0, 1.0))


def test_band_and_max_modes_filtering(chain_system):
    full = f.solve_modes(chain_system.mass, chain_system.stiffness, f.BandSpec(0.0, 1.0))
    upper = full.frequencies[5]
    banded = f.solve_modes(
        chain_system.mass, chain_system.stiffness, f.BandSpec(0.0, upper * 1.0001)
    )
    assert banded.n_modes == 6
    capped = f.solve_modes(
        chain_system.mass, chain_system.stiffness, f.BandSpec(0.0, 1.0), max_modes=4
    )
    assert capped.n_modes == 4


def test_sparse_path_matches_dense(chain_system):
    import scipy.sparse as sp

    dense_ms = f.solve_modes(
        chain_system.mass, chain_system.stiffness, f.BandSpec(0.0, 0.2)
    )
    sparse_ms = f.solve_modes(
        sp.csr_matrix(chain_system.mass),
        sp.csr_matrix(chain_system.stiffness),
        f.BandSpec(0.0, 0.2),
        dense_threshold=1,
    )
    n = min(dense_ms.n_modes, sparse_ms.n_modes)
    assert n >= 5
    assert np.allclose(
        sparse_ms.frequencies[:n], dense_ms.frequencies[:n], rtol=1e-8, atol=1e-10
    )


# ---------------------------------------------------------------------------
# Fixed-interface modes
# ---------------------------------------------------------------------------


def test_fixed_interface_chain_matches_clamped_formula(chain_pair):
    c1, _ = chain_pair
    ms = f.solve_fixed_interface_modes(c1, f.BandSpec(0.0, 1.0))
    exact = chain_frequencies_fixed(10, 1.0, 1.0)
    rel = np.abs(ms.frequencies - exact) / exact
    assert rel.max() < 1e-8
    assert ms.rigid_count == 0


def test_fixed_interface_interlaces_free_spectrum(chain_pair, box_pair):
    """Cauchy interlacing: clamping c DoF gives free_k <= fixed_k <= free_{k+c},
    counting rigid modes (so the clamped fundamental sits above free mode 1
    but *below* free mode 1+c)."""
    c1, _ = chain_pair  # one junction DoF: the two-sided bound is tight
    free = f.solve_component_modes(c1, f.BandSpec(0.0, 1.0))
    fixed = f.solve_fixed_interface_modes(c1, f.BandSpec(0.0, 1.0))
    for k in range(fixed.n_modes):
        assert fixed.frequencies[k] >= free.frequencies[k] * (1 - 1e-12)
        assert fixed.frequencies[k] <= free.frequencies[k + 1] * (1 + 1e-12)
    b1, _ = box_pair  # many constraints: check the lower bound only
    free_b = f.solve_component_modes(b1, f.BandSpec(0.0, 1e6))
    fixed_b = f.solve_fixed_interface_modes(b1, f.BandSpec(0.0, 1e6))
    n = min(free_b.n_modes, fixed_b.n_modes)
    assert np.all(
        fixed_b.frequencies[:n] >= free_b.frequencies[:n] * (1 - 1e-12)
    )


def test_fixed_interface_box_has_no_rigid_modes(small_box_pair):
    c1, _ = small_box_pair
    ms = f.solve_fixed_interface_modes(c1, f.BandSpec(0.0, 1e7))
    assert ms.rigid_count == 0
    assert ms.frequencies[0] > 1.0


# ---------------------------------------------------------------------------
# Reduced solves
# ---------------------------------------------------------------------------


def test_reduced_with_exact_eigenvector_basis_is_exact(chain_system, chain_band):
    full = f.solve_modes(chain_system.mass, chain_system.stiffness, chain_band)
    red = f.solve_reduced(full.shapes, chain_system, chain_band)
    el = full.rigid_count
    assert np.allclose(
        red.frequencies[el:], full.frequencies[el:], rtol=1e-10
    )


def test_reduced_with_single_mode(chain_system, chain_band):
    full = f.solve_modes(chain_system.mass, chain_system.stiffness, chain_band)
    i = 4
    red = f.solve_reduced(full.shapes[:, [i]], chain_system, chain_band)
    assert red.n_modes == 1
    assert np.isclose(red.frequencies[0], full.frequencies[i], rtol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_square_random_basis_preserves_spectrum(chain_system, chain_band, seed):
    rng = np.random.default_rng(seed)
    n = chain_system.n_global
    T = rng.standard_normal((n, n))
    full = f.solve_modes(chain_system.mass, chain_system.stiffness, chain_band)
    red = f.solve_reduced(T, chain_system, chain_band)
    el = full.rigid_count
    assert np.allclose(red.frequencies[el:], full.frequencies[el:], rtol=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_rayleigh_ritz_bound(chain_system, chain_band, seed):
    rng = np.random.default_rng(seed)
    n = chain_system.n_global
    T = rng.standard_normal((n, 7))
    full = f.solve_modes(chain_system.mass, chain_system.stiffness, chain_band)
    red = f.solve_reduced(T, chain_system, chain_band)
    for i, fr in enumerate(red.frequencies):
        assert fr >= full.frequencies[i] * (1 - 1e-10)


def test_rank_deficient_basis_raises_conditioning_error(chain_system, chain_band):
    n = chain_system.n_global
    T = np.ones((n, 3))
    with pytest.raises(ConditioningError) as err:
        f.solve_reduced(T, chain_system, chain_band)
    assert err.value.condition_number > 1e10


def test_eigen_residual_invariant(box_system, box_band):
    ms = f.solve_modes(box_system.mass, box_system.stiffness, box_band)
    K = box_system.stiffness
    M = box_system.mass
    for i in range(ms.rigid_count, ms.n_modes):
        phi = ms.shapes[:, i]
        lam = (2 * np.pi * ms.frequencies[i]) ** 2
        r = K @ phi - lam * (M @ phi)
        assert np.linalg.norm(r) <= 1e-6 * np.linalg.norm(K @ phi)


def test_determinism_bitwise(chain_system, chain_band):
    a = f.solve_modes(chain_system.mass, chain_system.stiffness, chain_band)
    b = f.solve_modes(chain_system.mass, chain_system.stiffness, chain_band)
    assert np.array_equal(a.frequencies, b.frequencies)
    assert np.array_equal(a.shapes, b.shapes)


def test_sign_canonicalization():
    V = np.array([[0.2, -0.9], [-0.8, 0.1]])
    out = canonicalize_signs(V)
    for k in range(out.shape[1]):
        col = out[:, k]
        assert col[np.argmax(np.abs(col))] > 0


def test_condition_number_helper():
    T = np.diag([10.0, 1.0, 0.1])
    assert np.isclose(basis_condition_number(T), 100.0, rtol=1e-12)


def test_empty_interior_rejected(unit_material):
    M = np.eye(2)
    K = np.array([[1.0, -1.0], [-1.0, 1.0]])
    part = f.DofPartition(interior=np.array([], dtype=int), junction=np.array([0, 1]))
    c = f.ComponentModel(id=1, mass=M, stiffness=K, partition=part)
    with pytest.raises(InvalidArgumentError):
        f.solve_fixed_interface_modes(c, f.BandSpec(0.0, 1.0))
