"""Tests for regression-theorem correlations and Wick higher-order coherence."""

import math

import numpy as np
import pytest

from src.core.config import WICK_MAX_ORDER
from src.core.errors import UnstableModelError
from src.core.model import ModelSpec, make_bimodal
from src.services.correlations import (
    g1,
    g1_bimodal_closed_form,
    g2k,
    g2k_power_terms,
    g2k_wick,
    permanent_by_pairing,
    unnormalized_ttcf,
)

TAU = np.linspace(0.0, 5.0, 51)


def test_g1_starts_at_one(ep_model):
    series = g1(ep_model, "a1", TAU)
    assert series.values[0] == pytest.approx(1.0, abs=1e-12)
    assert series.order == 1 and series.mode == "a1"


@pytest.mark.parametrize("supermode", ["c1", "c2"])
def test_supermode_g1_is_polynomial_times_exponential(ep_model, supermode):
    """Test that at the EP g1 of the supermodes is e^(-3τ/2)(1 ± τ/2)."""
    series = g1(ep_model, supermode, TAU)
    sign = 1.0 if supermode == "c1" else -1.0
    np.testing.assert_allclose(series.values, np.exp(-1.5 * TAU) * (1 + sign * TAU / 2), atol=1e-10)
    closed = g1_bimodal_closed_form(3.0, 1.0, -1.0, 0.0, supermode, TAU)
    np.testing.assert_allclose(series.values, closed, atol=1e-10)


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("supermode", ["c1", "c2"])
def test_regression_g1_matches_closed_form_for_random_models(seed, supermode):
    rng = np.random.default_rng(seed)
    omega1, omega2 = rng.uniform(-2.0, 2.0, size=2)
    gamma = rng.uniform(0.5, 4.0)
    gamma12 = rng.uniform(-0.95, 0.95) * gamma
    tau = np.linspace(0.0, 10.0, 101)
    series = g1(make_bimodal(omega1, omega2, gamma, gamma12), supermode, tau)
    closed = g1_bimodal_closed_form(gamma, gamma12, omega1 - omega2, (omega1 + omega2) / 2, supermode, tau)
    np.testing.assert_allclose(series.values, closed, atol=1e-8)


def test_closed_form_g1_is_continuous_across_the_ep():
    tau = np.array([0.5, 2.0])
    at_ep = g1_bimodal_closed_form(3.0, 1.0, 1.0, 0.0, "c1", tau)
    near_ep = g1_bimodal_closed_form(3.0, 1.0, 1.0 - 1e-9, 0.0, "c1", tau)
    np.testing.assert_allclose(near_ep, at_ep, atol=1e-8)


def test_closed_form_g1_rejects_bad_arguments():
    with pytest.raises(ValueError):
        g1_bimodal_closed_form(3.0, 1.0, 1.0, 0.0, "a1", TAU)
    with pytest.raises(ValueError):
        g1_bimodal_closed_form(0.0, 1.0, 1.0, 0.0, "c1", TAU)


def test_g2_is_one_plus_g1_squared(thermal_ep_model):
    first = g1(thermal_ep_model, "a2", TAU)
    second = g2k(thermal_ep_model, "a2", 1, TAU)
    assert second.order == 2
    np.testing.assert_allclose(second.values.real, 1 + np.abs(first.values) ** 2, atol=1e-12)
    assert second.values[0].real == pytest.approx(2.0)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_zero_delay_coherence_is_factorial(k):
    """Test that g(2k)(0) of a thermal field is (2k)!."""
    assert g2k_wick(1.0, k) == pytest.approx(math.factorial(2 * k))


def test_permanent_methods_agree():
    g = 0.6 * np.exp(0.3j)
    assert g2k_wick(g, 2, method="enumerate") == pytest.approx(g2k_wick(g, 2, method="ryser"))
    assert g2k_wick(g, 5) == pytest.approx(g2k_wick(g, 5, method="ryser"))
    assert permanent_by_pairing(np.array([[1, 2], [3, 4]])) == 10


def test_power_terms_sum_to_coherence():
    terms = g2k_power_terms(0.6, 2)
    np.testing.assert_allclose(terms, [4.0, 16 * 0.36, 4 * 0.6 ** 4])
    assert terms.sum() == pytest.approx(g2k_wick(0.6, 2))


def test_order_and_magnitude_guards():
    with pytest.raises(ValueError):
        g2k_wick(0.5, 0)
    with pytest.raises(ValueError):
        g2k_wick(0.5, WICK_MAX_ORDER + 1)
    with pytest.raises(ValueError):
        g2k_wick(1.5, 1)
    with pytest.raises(ValueError):
        g2k_wick(0.5, 1, method="guess")


def test_vacuum_ttcf_vanishes(ep_model):
    """Test that the unnormalized correlation is zero without thermal photons."""
    series = unnormalized_ttcf(ep_model, "a1", TAU)
    assert series.normalization == 0.0
    assert not np.any(np.abs(series.values) > 1e-15)


def test_lossless_model_is_unstable():
    spec = ModelSpec(omega=[1.0], chi=None, gamma=[[0.0]])
    with pytest.raises(UnstableModelError):
        g1(spec, 0, TAU)


def test_descending_tau_is_rejected(ep_model):
    with pytest.raises(ValueError):
        g1(ep_model, "a1", [1.0, 0.5])
