"""Tests for power and intensity-fluctuation spectra and lineshape analysis."""

import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from src.core.model import make_bimodal
from src.services.spectra import (
    CLOSED_FORM,
    INTENSITY,
    SpectrumSeries,
    cubic_lorentzian,
    intensity_fluctuation_spectrum,
    intensity_spectrum_closed_form_ep,
    lineshape_analysis,
    lorentzian_power,
    plateau_curvature,
    power_spectrum,
    power_spectrum_closed_form,
    squared_lorentzian,
)

OMEGA = np.linspace(-4.0, 4.0, 81)


@pytest.mark.parametrize("supermode, peak", [("c1", 16 / (9 * math.pi)), ("c2", 8 / (9 * math.pi))])
def test_ep_peak_heights(ep_model, supermode, peak):
    """Test the closed-form convention peaks 16/(9π) and 8/(9π) at the EP."""
    canonical = power_spectrum(ep_model, supermode, [0.0])
    closed = power_spectrum(ep_model, supermode, [0.0], convention=CLOSED_FORM)
    assert closed.values[0] == pytest.approx(peak, rel=1e-10)
    assert canonical.values[0] == pytest.approx(peak / 2, rel=1e-10)
    aliased = power_spectrum(ep_model, supermode, [0.0], convention="paper")
    assert aliased.convention == CLOSED_FORM
    assert aliased.values[0] == closed.values[0]


def test_peak_ratio_is_two(ep_model):
    c1 = power_spectrum(ep_model, "c1", [0.0]).values[0]
    c2 = power_spectrum(ep_model, "c2", [0.0]).values[0]
    assert c1 / c2 == pytest.approx(2.0, rel=1e-10)


@pytest.mark.parametrize("gamma12", [1.0, 0.5, 2.0])
@pytest.mark.parametrize("supermode", ["c1", "c2"])
def test_resolvent_matches_closed_form(supermode, gamma12):
    """Test the closed-form two-mode spectra on, below and above the EP."""
    model = make_bimodal(-0.5, 0.5, 3.0, gamma12)
    numeric = power_spectrum(model, supermode, OMEGA, convention=CLOSED_FORM)
    closed = power_spectrum_closed_form(3.0, gamma12, -1.0, supermode, OMEGA)
    np.testing.assert_allclose(numeric.values, closed.values, rtol=1e-9, atol=1e-14)


@pytest.mark.parametrize("seed", range(20))
def test_closed_forms_are_twice_canonical_for_random_models(seed):
    """Test the factor 2 between the closed-form supermode spectra and the canonical transform."""
    rng = np.random.default_rng(seed)
    delta = rng.uniform(-2.0, 2.0)
    gamma = rng.uniform(0.5, 4.0)
    gamma12 = rng.uniform(-0.95, 0.95) * gamma
    model = make_bimodal(-delta / 2, delta / 2, gamma, gamma12)
    for supermode in ("c1", "c2"):
        canonical = power_spectrum(model, supermode, OMEGA)
        closed = power_spectrum_closed_form(gamma, gamma12, delta, supermode, OMEGA)
        np.testing.assert_allclose(closed.values / canonical.values, 2.0, rtol=1e-6)
        assert np.all(canonical.values >= 0)


def test_quadrature_cross_check(thermal_ep_model):
    omega = [0.0, 0.7, 2.0]
    resolvent = power_spectrum(thermal_ep_model, "a1", omega)
    quadrature = power_spectrum(thermal_ep_model, "a1", omega, method="quadrature")
    np.testing.assert_allclose(quadrature.values, resolvent.values, atol=1e-7)


def test_power_spectrum_has_unit_area(ep_model):
    """Test that the canonical S(1) integrates to g1(0) = 1.

    Over [-L, L] the 1.5/(πω²) tails of mode a1 are missing, 3/(πL) in total.
    """
    omega = np.linspace(-200.0, 200.0, 40001)
    values = power_spectrum(ep_model, "a1", omega).values
    assert trapezoid(values, omega) == pytest.approx(1.0 - 3.0 / (math.pi * 200.0), abs=1e-5)


@pytest.mark.parametrize("supermode, at_zero", [("c1", 0.462963), ("c2", 0.240741)])
def test_intensity_spectrum_at_ep(ep_model, supermode, at_zero):
    """Test the cubic-Lorentzian intensity spectra, π times canonical."""
    numeric = intensity_fluctuation_spectrum(ep_model, supermode, OMEGA, convention=CLOSED_FORM,
                                             method="resolvent")
    closed = intensity_spectrum_closed_form_ep(3.0, 1.0, supermode, OMEGA)
    assert closed.values[40] == pytest.approx(at_zero, abs=1e-6)
    np.testing.assert_allclose(numeric.values, closed.values, rtol=1e-9, atol=1e-14)
    assert numeric.kind == INTENSITY


def test_intensity_quadrature_matches_resolvent(ep_model):
    omega = [0.0, 1.5]
    quadrature = intensity_fluctuation_spectrum(ep_model, "c2", omega)
    resolvent = intensity_fluctuation_spectrum(ep_model, "c2", omega, method="resolvent")
    np.testing.assert_allclose(quadrature.values, resolvent.values, atol=1e-7)


def test_plateau_at_the_ep(ep_model):
    """Test that the c2 line is flat at its top while c1 is curved."""
    omega = np.linspace(-0.5, 0.5, 101)
    c2 = power_spectrum(ep_model, "c2", omega)
    c1 = power_spectrum(ep_model, "c1", omega)
    assert abs(plateau_curvature(c2)) < 1e-6
    assert plateau_curvature(c1) < -1.0


def test_lorentzian_helpers():
    x = np.array([0.0, 1.0])
    np.testing.assert_allclose(squared_lorentzian(x, 0.0, 1.0), [1.0, 0.25])
    np.testing.assert_allclose(cubic_lorentzian(x, 0.0, 1.0), [1.0, 0.125])
    np.testing.assert_allclose(lorentzian_power(x, 1.0, 2.0, 1), [0.2, 0.25])


def test_lineshape_single_lorentzian():
    x = np.linspace(-10.0, 10.0, 201)
    series = SpectrumSeries(omega=x, values=1.0 / (x ** 2 + 1.0))
    report = lineshape_analysis(series)
    assert report.winner == "single-lorentzian"
    assert report.classification == "single-lorentzian"
    assert report.components[0].width == pytest.approx(1.0, rel=1e-6)
    assert report.peak_curvature < 0


def test_lineshape_squared_at_ep(ep_model):
    """Test that the EP c2 line needs a squared Lorentzian, two plain ones do 10x worse."""
    x = np.linspace(-10.0, 10.0, 401)
    report = lineshape_analysis(power_spectrum(ep_model, "c2", x))
    assert report.winner == "lorentzian+squared"
    assert report.classification == "squared"
    assert report.residuals["two-lorentzians"] >= 10 * report.residuals["lorentzian+squared"]
    assert all(c.width == pytest.approx(1.5, rel=1e-6) for c in report.components)


def test_lineshape_difference_of_lorentzians():
    """Test that a dip at the center is read as a difference of Lorentzians."""
    x = np.linspace(-10.0, 10.0, 401)
    y = 8.0 / (x ** 2 + 4.0) - 0.25 / (x ** 2 + 0.25)
    report = lineshape_analysis(SpectrumSeries(omega=x, values=y))
    assert report.center_is_local_minimum
    assert report.classification == "difference"
    assert report.peak_curvature > 0


def test_lineshape_input_checks():
    with pytest.raises(ValueError):
        lineshape_analysis(SpectrumSeries(omega=np.arange(4.0), values=np.ones(4)))
    with pytest.raises(ValueError):
        lineshape_analysis(SpectrumSeries(omega=np.array([0.0, 1.0, 3.0, 4.0, 7.0]), values=np.ones(5)))


def test_closed_forms_reject_unknown_supermode():
    with pytest.raises(ValueError):
        power_spectrum_closed_form(3.0, 1.0, 1.0, "a1", OMEGA)
    with pytest.raises(ValueError):
        intensity_spectrum_closed_form_ep(3.0, 1.0, "c3", OMEGA)


def test_unknown_convention_and_method(ep_model):
    with pytest.raises(ValueError):
        power_spectrum(ep_model, "a1", OMEGA, convention="natural")
    with pytest.raises(ValueError):
        power_spectrum(ep_model, "a1", OMEGA, method="fft")
