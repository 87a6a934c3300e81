"""Tests of the truncated Fock-space oracle against the moment-based results."""

import numpy as np
import pytest

from src.core.errors import MemoryBudgetError
from src.core.model import PRESETS, ModelSpec
from src.services.correlations import g1, g2k
from src.services.fockspace import (
    apply_generator,
    build_superoperator,
    coherence_oracle,
    g1_oracle,
    liouvillian_eigenmatrices,
    sector_spectrum,
    spectral_deviation,
    spectrum_subset,
    steady_state_density,
    trace_residual,
    ttcf_oracle,
)
from src.services.moments import bimodal_liouvillian_eigenvalues
from src.services.nhh import bimodal_eigenvalues

TAU = np.linspace(0.0, 5.0, 26)


@pytest.fixture(scope="module")
def thermal_sop():
    return build_superoperator(PRESETS["bimodal-ep"].to_model().replace(n_th=0.2), 8)


@pytest.fixture(scope="module")
def thermal_rho(thermal_sop):
    return steady_state_density(thermal_sop)


def test_two_level_truncation_spectrum():
    """Test the hand-solved cutoff-1 generator: {0, -γ/2 ± iω, -γ}."""
    sop = build_superoperator(ModelSpec(omega=[1.0], chi=None, gamma=[[1.0]]), 1)
    values = np.linalg.eigvals(sop.superoperator.toarray())
    assert spectral_deviation(values, [0.0, -0.5 + 1j, -0.5 - 1j, -1.0]) < 1e-12


def test_generator_preserves_trace(ep_model):
    sop = build_superoperator(ep_model, 5)
    assert trace_residual(sop) < 1e-10
    rho = np.zeros((sop.dim, sop.dim), dtype=complex)
    rho[1, 1] = 1.0
    assert abs(np.trace(apply_generator(sop, rho))) < 1e-12


def test_thermal_steady_state(thermal_sop, thermal_rho):
    """Test that the stationary state has <a_j† a_k> = 0.2·δ_jk within the truncation bound."""
    assert thermal_rho.trace == pytest.approx(1.0, abs=1e-12)
    a1, a2 = thermal_sop.annihilators
    assert thermal_rho.expectation(a1.conj().T @ a1).real == pytest.approx(0.2, abs=5e-5)
    assert thermal_rho.expectation(a2.conj().T @ a2).real == pytest.approx(0.2, abs=5e-5)
    assert abs(thermal_rho.expectation(a1.conj().T @ a2)) < 5e-5
    assert thermal_rho.min_eigenvalue > -1e-10
    assert thermal_rho.boundary_population() < 1e-4


def test_vacuum_sectors_contain_moment_spectra(ep_model):
    """Test that q = 1 holds -iν and q = 0 holds 0 and the -γ±D, -γ, -γ quadruple."""
    sop = build_superoperator(ep_model, 6)
    assert len(sop.sectors[0]) == 231
    single = -1j * np.array(bimodal_eigenvalues(3.0, 1.0, -1.0))
    assert spectral_deviation(sector_spectrum(sop, 1), single) < 1e-6
    quadruple = bimodal_liouvillian_eigenvalues(3.0, 1.0, -1.0)
    assert spectral_deviation(sector_spectrum(sop, 0), np.concatenate([[0.0], quadruple])) < 1e-6


def test_slowest_modes(ep_model):
    sop = build_superoperator(ep_model, 3)
    values = spectrum_subset(sop, 3)
    assert abs(values[0]) < 1e-10
    modes = liouvillian_eigenmatrices(sop, 1)
    assert modes[0].sector == 0
    assert abs(np.trace(modes[0].matrix)) > 0.5
    with pytest.raises(ValueError):
        spectrum_subset(sop, 0)


def test_oracle_g1_matches_regression(thermal_sop, thermal_rho, thermal_ep_model):
    for mode in ("a1", "a2", "c1", "c2"):
        oracle = g1_oracle(thermal_sop, mode, TAU, thermal_rho)
        reference = g1(thermal_ep_model, mode, TAU)
        assert np.abs(oracle.values - reference.values).max() < 1e-4


def test_oracle_g2_matches_wick(thermal_sop, thermal_rho, thermal_ep_model):
    oracle = coherence_oracle(thermal_sop, "a1", 1, TAU, thermal_rho)
    reference = g2k(thermal_ep_model, "a1", 1, TAU)
    assert np.abs(oracle.values.real - reference.values.real).max() < 5e-3
    assert oracle.values[0].real == pytest.approx(2.0, abs=5e-3)


def test_unnormalized_ttcf(thermal_sop, thermal_rho):
    a = thermal_sop.annihilators[0].toarray()
    values = ttcf_oracle(thermal_sop, a.conj().T, a, np.eye(thermal_sop.dim), [0.0], thermal_rho)
    assert values[0].real == pytest.approx(0.2, abs=5e-5)


def test_oracle_guards(ep_model, thermal_sop, thermal_rho):
    with pytest.raises(ValueError):
        build_superoperator(ep_model, 0)
    with pytest.raises(ValueError):
        build_superoperator(ModelSpec(omega=[0.0] * 4, chi=None, gamma=np.eye(4)), 1)
    with pytest.raises(MemoryBudgetError):
        build_superoperator(ep_model, 8, budget_mb=1.0)
    with pytest.raises(ValueError):
        coherence_oracle(thermal_sop, "a1", 8, TAU, thermal_rho)
    with pytest.raises(ValueError):
        g1_oracle(build_superoperator(ep_model, 2), "a1", TAU)
    with pytest.raises(ValueError):
        spectral_deviation([0.0], [0.0, 1.0])
