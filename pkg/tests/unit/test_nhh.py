"""Tests for the effective Hamiltonian, its eigenstructure and symmetries."""

import math

import numpy as np
import pytest

from src.core.model import make_bimodal, validate
from src.services.nhh import (
    Frame,
    bimodal_discriminant,
    bimodal_eigenvalues,
    bimodal_eigenvectors,
    build_effective_nhh,
    eigendecompose,
    hep_locus_bimodal,
    liouvillian_eigs_from_nhh,
    resolve_mode,
    supermode_lindblad_coefficients,
    supermode_transform,
    symmetry_check,
)


def test_effective_hamiltonian_of_preset(ep_model):
    h = build_effective_nhh(ep_model)
    expected = np.array([[-0.5 - 1.5j, -0.5j], [-0.5j, 0.5 - 1.5j]])
    np.testing.assert_allclose(h.matrix, expected, atol=1e-15)


def test_rotating_frame_removes_mean_frequency():
    model = validate(make_bimodal(1.5, 2.5, 3.0, 1.0))
    h = build_effective_nhh(model, Frame.ROTATING)
    assert h.omega_bar == pytest.approx(2.0)
    np.testing.assert_allclose(np.diag(h.matrix).real, [-0.5, 0.5])


def test_exceptional_point_is_one_defective_cluster(ep_model):
    """Test that the EP shows one eigenvalue -1.5i with a single eigenvector."""
    report = eigendecompose(build_effective_nhh(ep_model))
    assert len(report.clusters) == 1
    cluster = report.clusters[0]
    assert (cluster.algebraic, cluster.geometric) == (2, 1)
    assert cluster.jordan_blocks == [2]
    assert abs(cluster.value - (-1.5j)) < 1e-7
    assert report.defective_clusters == [cluster]
    np.testing.assert_allclose(liouvillian_eigs_from_nhh(report), [-1.5, -1.5], atol=1e-7)


@pytest.mark.parametrize("split, tol", [(3e-7, None), (1e-7, 1e-12)])
def test_resolved_near_ep_pair_is_two_simple_clusters(split, tol):
    """Test that a diagonalizable pair just above the EP is not reported as defective."""
    gamma12 = math.sqrt(1.0 + split ** 2)
    model = validate(make_bimodal(-0.5, 0.5, 3.0, gamma12))
    report = eigendecompose(build_effective_nhh(model), tol)
    assert [(c.algebraic, c.geometric) for c in report.clusters] == [(1, 1), (1, 1)]
    assert not report.defective_clusters
    gap = abs(report.eigenvalues[0] - report.eigenvalues[1])
    assert gap == pytest.approx(split, rel=0.2)


def test_below_ep_matches_closed_form(below_ep_model):
    report = eigendecompose(build_effective_nhh(below_ep_model))
    assert not report.defective_clusters
    expected = np.array(bimodal_eigenvalues(3.0, 0.5, -1.0))
    expected = expected[np.lexsort((expected.imag, expected.real))]
    np.testing.assert_allclose(report.eigenvalues, expected, atol=1e-12)
    # D = sqrt(0.25 - 1) is imaginary: equal decay, split frequencies
    assert bimodal_discriminant(0.5, -1.0) == pytest.approx(1j * math.sqrt(0.75))


def test_discriminant_branch_above_ep():
    model = validate(make_bimodal(-0.5, 0.5, 3.0, 2.0))
    report = eigendecompose(build_effective_nhh(model))
    assert report.discriminant() == pytest.approx(math.sqrt(3.0), abs=1e-12)
    assert bimodal_discriminant(2.0, 1.0) == pytest.approx(math.sqrt(3.0))


def test_hep_locus():
    assert hep_locus_bimodal(-1.0) == 1.0


def test_eigendecompose_rejects_non_square():
    with pytest.raises(ValueError):
        eigendecompose(np.zeros((2, 3)))


def test_preset_is_anti_pt_symmetric(ep_model):
    report = symmetry_check(build_effective_nhh(ep_model))
    assert report.classification == "anti-PT-symmetric"
    assert report.anti_pt_residual < 1e-14


def test_gauged_passive_pt():
    """Test that removing the mean loss exposes PT symmetry of unequal losses."""
    h = np.array([[-1.0j, 1.0], [1.0, -2.0j]])
    report = symmetry_check(h)
    assert report.gauge_rate == pytest.approx(1.5)
    assert report.classification == "passive-PT-symmetric"
    assert report.anti_pt_residual > 1.0


def test_parity_is_required_beyond_two_modes():
    with pytest.raises(ValueError, match="parity"):
        symmetry_check(np.eye(3, dtype=complex))
    with pytest.raises(ValueError, match="involution"):
        symmetry_check(np.eye(2, dtype=complex), parity=np.array([[0.0, 2.0], [0.5, 1.0]]))


def test_supermode_transform_is_a_similarity(ep_model):
    h = build_effective_nhh(ep_model)
    rotated = supermode_transform(h)
    np.testing.assert_allclose(np.diag(rotated.matrix).imag, [-1.0, -2.0], atol=1e-12)
    np.testing.assert_allclose(np.sort_complex(np.linalg.eigvals(rotated.matrix)),
                               np.sort_complex(np.linalg.eigvals(h.matrix)), atol=1e-7)


def test_supermode_coefficients_of_preset(ep_model):
    """Test that at pi/4 the cross terms vanish and the decays are 2 and 4."""
    coefficients = supermode_lindblad_coefficients(ep_model)
    assert coefficients.A1 == pytest.approx(2.0)
    assert coefficients.A2 == pytest.approx(4.0)
    assert coefficients.A12 == pytest.approx(0.0, abs=1e-12)
    assert coefficients.A21 == pytest.approx(0.0, abs=1e-12)
    assert coefficients.diagonalized
    assert coefficients.coupling_c12 == pytest.approx(-0.5)


def test_supermode_coefficients_at_zero_angle(ep_model):
    coefficients = supermode_lindblad_coefficients(ep_model, theta=0.0)
    assert (coefficients.A1, coefficients.A2) == (3.0, 3.0)
    assert (coefficients.A12, coefficients.A21) == (1.0, 1.0)
    assert not coefficients.diagonalized


def test_resolve_mode_labels(ep_model):
    model, index, label = resolve_mode(ep_model, 1)
    assert (index, label) == (1, "a2")
    assert model is ep_model

    rotated, index, label = resolve_mode(ep_model, "C1")
    assert (index, label) == (0, "c1")
    np.testing.assert_allclose(rotated.spec.gamma, np.diag([2.0, 4.0]), atol=1e-12)

    for bad in ("a3", "x1", 2, "c3"):
        with pytest.raises(ValueError):
            resolve_mode(ep_model, bad)


@pytest.mark.parametrize("seed", range(5))
def test_closed_form_eigenpairs_of_random_bimodal_models(seed):
    """Test that the closed-form eigenpairs solve H_eff for random two-mode parameters."""
    rng = np.random.default_rng(seed)
    omega1, omega2 = rng.uniform(-2.0, 2.0, size=2)
    gamma = rng.uniform(0.5, 4.0)
    gamma12 = rng.uniform(-1.0, 1.0) * gamma
    h = build_effective_nhh(make_bimodal(omega1, omega2, gamma, gamma12)).matrix
    delta = omega1 - omega2
    values = bimodal_eigenvalues(gamma, gamma12, delta, (omega1 + omega2) / 2)
    vectors = bimodal_eigenvectors(gamma12, delta)
    for k, nu in enumerate(values):
        np.testing.assert_allclose(h @ vectors[:, k], nu * vectors[:, k], atol=1e-12)
