"""
Power and intensity-fluctuation spectra.

Canonical spectra are (1/π)·Re of the one-sided Fourier transform of g⁽¹⁾
or g⁽²⁾ − 1. The resolvent path is exact for the linear regression
dynamics; adaptive quadrature is kept as an independent path. Closed forms
for the two-mode family are evaluated in their standard two-mode form and tagged with the
``closed-form`` convention, which differs from the canonical one by a
constant factor.
"""

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from lmfit import Minimizer, Parameters
from scipy.integrate import IntegrationWarning, quad

from ..core.errors import FitConvergenceError, QuadratureError
from ..core.model import ModelSpec, ValidatedModel
from ..core.runtime import get_logger
from ..utils.linalg import Propagator
from .correlations import _check_stable
from .moments import steady_state_matrix
from .nhh import build_effective_nhh, resolve_mode

logger = get_logger()

POWER = "power"
INTENSITY = "intensity-fluctuation"
CANONICAL = "canonical"
CLOSED_FORM = "closed-form"
CONVENTION_ALIASES = {"paper": CLOSED_FORM}

# Closed-form / canonical ratios, measured by the test-suite.
CLOSED_FORM_SCALE = {POWER: 2.0, INTENSITY: math.pi}

TAIL_BOUND = 1e-10
QUAD_TOL = 1e-8
_EP_D_RTOL = 1e-6


@dataclass
class SpectrumSeries:
    omega: np.ndarray
    values: np.ndarray
    kind: str = POWER
    convention: str = CANONICAL
    mode: str = ""
    method: str = ""


@dataclass
class LineComponent:
    center: float
    width: float
    power: int
    weight: float
    sign: int


@dataclass
class LineshapeReport:
    components: List[LineComponent]
    peak_curvature: float
    classification: str
    winner: str
    residuals: Dict[str, float] = field(default_factory=dict)
    aic: Dict[str, float] = field(default_factory=dict)
    reconstruction_rms: float = 0.0
    center_is_local_minimum: bool = False


def _rescale(values: np.ndarray, kind: str, convention: str) -> np.ndarray:
    convention = CONVENTION_ALIASES.get(convention, convention)
    if convention == CANONICAL:
        return values
    if convention == CLOSED_FORM:
        return values * CLOSED_FORM_SCALE[kind]
    raise ValueError(f"unknown convention {convention!r}; use {CANONICAL!r} or {CLOSED_FORM!r}")


class _RegressionSource:
    """g⁽¹⁾ of one mode as exp(G·τ) applied to the unit-occupation seed."""

    def __init__(self, model, mode):
        validated, index, label = resolve_mode(model, mode)
        self.label = label
        self.index = index
        self.h = build_effective_nhh(validated).matrix
        _check_stable(self.h)
        c_unit = steady_state_matrix(validated, 1.0)
        self.seed = c_unit[index]
        self.norm = c_unit[index, index].real
        self.decay = float(-np.linalg.eigvals(self.h).imag.max())
        self._propagator = Propagator(-1j * self.h)

    def g1(self, tau: float) -> complex:
        return complex(self._propagator.apply(self.seed, [tau])[0, self.index] / self.norm)

    def resolvent(self, omega: float) -> complex:
        """∫₀^∞ g⁽¹⁾(τ)e^{iωτ}dτ = [(i(H − ω))⁻¹ f]_j / C_jj."""
        n = self.h.shape[0]
        solved = np.linalg.solve(1j * (self.h - omega * np.eye(n)), self.seed)
        return complex(solved[self.index] / self.norm)

    def intensity_resolvent(self, omega: float) -> complex:
        """∫₀^∞ |g⁽¹⁾(τ)|² e^{iωτ}dτ via the doubled generator −iH ⊕ iH*."""
        n = self.h.shape[0]
        identity = np.eye(n)
        doubled = np.kron(-1j * self.h, identity) + np.kron(identity, 1j * self.h.conj())
        seed = np.kron(self.seed, self.seed.conj())
        solved = np.linalg.solve(-(doubled + 1j * omega * np.eye(n * n)), seed)
        return complex(solved[self.index * n + self.index] / self.norm ** 2)


def _tail_cutoff(fun: Callable[[float], float], decay: float) -> Tuple[float, float]:
    """Upper limit T with |fun| e-folding tail below TAIL_BOUND, and that tail."""
    t = 20.0 / decay
    for _ in range(60):
        tail = abs(fun(t)) / decay * 2.0
        if tail < 0.01 * TAIL_BOUND:
            return t, tail
        t *= 1.5
    raise QuadratureError("exponential tail did not fall below bound",
                          {"tail_estimate": tail, "upper_limit": t})


def _quad(fun: Callable[[float], float], upper: float, omega: float, weight: Optional[str]) -> Tuple[float, float]:
    """One adaptive integral over [0, T]; warnings only fail when the error is large."""
    options = dict(limit=500, epsabs=1e-12, epsrel=1e-10)
    if weight is not None:
        options.update(weight=weight, wvar=omega)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        value, error = quad(fun, 0.0, upper, **options)
    if not np.isfinite(value) or error > QUAD_TOL * max(1.0, abs(value)):
        raise QuadratureError("adaptive quadrature did not converge",
                              {"omega": omega, "error_estimate": float(error), "upper_limit": upper})
    return value, error


def _oscillatory_integral(real_part: Callable[[float], float], imag_part: Optional[Callable[[float], float]],
                          omega: float, upper: float) -> float:
    """Re ∫₀^T (u + iv)e^{iωτ}dτ = ∫u·cos(ωτ) − ∫v·sin(ωτ)."""
    if omega == 0.0:
        return _quad(real_part, upper, omega, None)[0]
    value, _ = _quad(real_part, upper, omega, "cos")
    if imag_part is not None:
        value -= _quad(imag_part, upper, omega, "sin")[0]
    return value


def power_spectrum(model: Union[ModelSpec, ValidatedModel], mode: Union[int, str],
                   omega_grid: Sequence[float], convention: str = CANONICAL,
                   method: str = "resolvent") -> SpectrumSeries:
    """
    S⁽¹⁾(ω) = (1/π)·Re ∫₀^∞ g⁽¹⁾(τ)e^{iωτ}dτ.

    Args:
        model: validated model
        mode: mode index or label (``a1``, ``c1`` ...)
        omega_grid: lab-frame frequencies
        convention: ``canonical`` or ``closed-form`` (twice canonical)
        method: ``resolvent`` (exact) or ``quadrature`` (cross-check)
    """
    source = _RegressionSource(model, mode)
    omega = np.asarray(omega_grid, dtype=float).reshape(-1)
    start_time = time.time()

    if method == "resolvent":
        values = np.array([source.resolvent(w).real for w in omega]) / math.pi
    elif method == "quadrature":
        upper, tail = _tail_cutoff(source.g1, source.decay)
        values = np.array([
            _oscillatory_integral(lambda t: source.g1(t).real, lambda t: source.g1(t).imag, w, upper)
            for w in omega
        ]) / math.pi
        logger.debug("power_quadrature_tail", upper_limit=upper, tail_estimate=tail)
    else:
        raise ValueError(f"unknown spectrum method {method!r}")

    if values.size and values.min() < -1e-10:
        logger.warning("power_spectrum_negative", minimum=float(values.min()), mode=source.label)
    logger.info("power_spectrum_computed",
                mode=source.label,
                method=method,
                points=int(omega.size),
                closed_form_ratio=CLOSED_FORM_SCALE[POWER],
                duration_ms=int((time.time() - start_time) * 1000))
    return SpectrumSeries(omega=omega, values=_rescale(values, POWER, convention), kind=POWER,
                          convention=CONVENTION_ALIASES.get(convention, convention),
                          mode=source.label, method=method)


def power_spectrum_closed_form(gamma: float, gamma12: float, delta: float, supermode: str,
                               omega_grid: Sequence[float], omega_bar: float = 0.0) -> SpectrumSeries:
    """
    Closed-form two-mode supermode power spectra, Ω = ω − ω̄.

    (1/πD)[K₊(D ∓ γ₁₂)/(Ω² + K₊²) + K₋(D ± γ₁₂)/(Ω² + K₋²)], K± = (γ ± D)/2,
    upper signs for c₁. At the exceptional point the limit
    (4/π)/(γ² + 4Ω²)·(γ ∓ γ₁₂ ± 2γ²γ₁₂/(γ² + 4Ω²)) is used.
    """
    sign = {"c1": 1.0, "c2": -1.0}.get(str(supermode).lower())
    if sign is None:
        raise ValueError(f"supermode must be 'c1' or 'c2', got {supermode!r}")
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    omega = np.asarray(omega_grid, dtype=float).reshape(-1)
    big_omega = omega - omega_bar
    d = complex(np.sqrt(complex(gamma12 ** 2 - delta ** 2)))

    if abs(d) < _EP_D_RTOL * gamma:
        u = gamma ** 2 + 4 * big_omega ** 2
        values = 4.0 / (math.pi * u) * (gamma - sign * gamma12 + sign * 2 * gamma ** 2 * gamma12 / u)
    else:
        k_plus, k_minus = (gamma + d) / 2, (gamma - d) / 2
        terms = (k_plus * (d - sign * gamma12) / (big_omega ** 2 + k_plus ** 2)
                 + k_minus * (d + sign * gamma12) / (big_omega ** 2 + k_minus ** 2))
        values = (terms / (math.pi * d)).real
    return SpectrumSeries(omega=omega, values=values, kind=POWER, convention=CLOSED_FORM,
                          mode=str(supermode).lower(), method="closed-form")


def intensity_fluctuation_spectrum(model: Union[ModelSpec, ValidatedModel], mode: Union[int, str],
                                   omega_grid: Sequence[float], convention: str = CANONICAL,
                                   method: str = "quadrature") -> SpectrumSeries:
    """
    S⁽²⁾(ω) = (1/π)·Re ∫₀^∞ (g⁽²⁾(τ) − 1)e^{iωτ}dτ with g⁽²⁾ − 1 = |g⁽¹⁾|².

    Raises:
        QuadratureError: quadrature or tail bound failed
    """
    source = _RegressionSource(model, mode)
    omega = np.asarray(omega_grid, dtype=float).reshape(-1)
    start_time = time.time()

    if method == "quadrature":
        def excess(t):
            return abs(source.g1(t)) ** 2

        upper, tail = _tail_cutoff(excess, 2 * source.decay)
        values = np.array([_oscillatory_integral(excess, None, w, upper) for w in omega]) / math.pi
        logger.debug("intensity_quadrature_tail", upper_limit=upper, tail_estimate=tail)
    elif method == "resolvent":
        values = np.array([source.intensity_resolvent(w).real for w in omega]) / math.pi
    else:
        raise ValueError(f"unknown spectrum method {method!r}")

    logger.info("intensity_spectrum_computed",
                mode=source.label,
                method=method,
                points=int(omega.size),
                duration_ms=int((time.time() - start_time) * 1000))
    return SpectrumSeries(omega=omega, values=_rescale(values, INTENSITY, convention), kind=INTENSITY,
                          convention=CONVENTION_ALIASES.get(convention, convention),
                          mode=source.label, method=method)


def intensity_spectrum_closed_form_ep(gamma: float, gamma12: float, supermode: str,
                                      omega_grid: Sequence[float], delta: Optional[float] = None) -> SpectrumSeries:
    """
    Cubic-Lorentzian S⁽²⁾ of the supermodes at the exceptional point.

    (γ ∓ γ₁₂)/v − γγ₁₂(3γ₁₂ ∓ 4γ)/(2v²) + 2γ³γ₁₂²/v³ with v = ω² + γ²,
    upper signs for c₁; written without the 1/π of the canonical transform.
    """
    sign = {"c1": 1.0, "c2": -1.0}.get(str(supermode).lower())
    if sign is None:
        raise ValueError(f"supermode must be 'c1' or 'c2', got {supermode!r}")
    if delta is not None and abs(abs(delta) - abs(gamma12)) > 1e-12 * max(1.0, abs(gamma12)):
        logger.warning("intensity_closed_form_off_ep", gamma12=gamma12, delta=delta)
    omega = np.asarray(omega_grid, dtype=float).reshape(-1)
    v = omega ** 2 + gamma ** 2
    values = ((gamma - sign * gamma12) / v
              - gamma * gamma12 * (3 * gamma12 - sign * 4 * gamma) / (2 * v ** 2)
              + 2 * gamma ** 3 * gamma12 ** 2 / v ** 3)
    return SpectrumSeries(omega=omega, values=values, kind=INTENSITY, convention=CLOSED_FORM,
                          mode=str(supermode).lower(), method="closed-form")


# ---------------------------------------------------------------------------
# Lineshape analysis
# ---------------------------------------------------------------------------

# name -> (number of widths, Lorentzian powers per width)
_LINESHAPE_MODELS = {
    "single-lorentzian": (1, (1,)),
    "two-lorentzians": (2, (1,)),
    "lorentzian+squared": (1, (1, 2)),
    "lorentzian+squared+cubic": (1, (1, 2, 3)),
}


def lorentzian_power(x: np.ndarray, center: float, width: float, power: int) -> np.ndarray:
    """1/((x − center)² + width²)^power."""
    return 1.0 / ((x - center) ** 2 + width ** 2) ** power


def squared_lorentzian(x: np.ndarray, center: float, width: float) -> np.ndarray:
    return lorentzian_power(x, center, width, 2)


def cubic_lorentzian(x: np.ndarray, center: float, width: float) -> np.ndarray:
    return lorentzian_power(x, center, width, 3)


def _basis(name: str, x: np.ndarray, center: float, widths: Sequence[float]) -> Tuple[np.ndarray, List[Tuple[float, int]]]:
    n_widths, powers = _LINESHAPE_MODELS[name]
    columns, labels = [], []
    for w in widths[:n_widths]:
        for p in powers:
            columns.append(lorentzian_power(x, center, w, p))
            labels.append((w, p))
    return np.column_stack(columns), labels


def _parameter_count(name: str) -> int:
    n_widths, powers = _LINESHAPE_MODELS[name]
    return 1 + n_widths + n_widths * len(powers)


def _fit_model(name: str, x: np.ndarray, y: np.ndarray, center0: float, width0: float):
    """Variable projection: lmfit varies center and widths, amplitudes by lstsq."""
    n_widths, _ = _LINESHAPE_MODELS[name]
    span = float(x.max() - x.min())
    starts = ([(f,) for f in (0.5, 1.0, 2.0)] if n_widths == 1
              else [(0.3, 3.0), (0.5, 1.5), (0.7, 2.0), (1.0, 4.0)])

    def residual(params):
        widths = [params[f"w{i}"].value for i in range(n_widths)]
        basis, _ = _basis(name, x, params["center"].value, widths)
        amplitudes, *_ = np.linalg.lstsq(basis, y, rcond=None)
        return basis @ amplitudes - y

    best = None
    for factors in starts:
        params = Parameters()
        params.add("center", value=center0, min=x.min(), max=x.max())
        for i, factor in enumerate(factors):
            params.add(f"w{i}", value=width0 * factor, min=1e-6 * span, max=10 * span)
        try:
            result = Minimizer(residual, params).minimize(method="leastsq", xtol=1e-15, ftol=1e-15)
        except (ValueError, np.linalg.LinAlgError) as e:
            logger.debug("lineshape_start_failed", model=name, start=factors, error=str(e))
            continue
        rss = float(np.sum(residual(result.params) ** 2))
        if np.isfinite(rss) and (best is None or rss < best[0]):
            best = (rss, result.params)

    if best is None:
        raise FitConvergenceError(f"no start converged for lineshape model {name}",
                                  {"model": name, "center_guess": center0, "width_guess": width0})
    rss, params = best
    widths = [params[f"w{i}"].value for i in range(n_widths)]
    center = params["center"].value
    basis, labels = _basis(name, x, center, widths)
    amplitudes, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return rss, center, labels, amplitudes


def peak_curvature(x: np.ndarray, y: np.ndarray, at: float) -> float:
    """Five-point central second difference at the grid point nearest ``at``."""
    i = int(np.argmin(np.abs(x - at)))
    i = min(max(i, 2), len(x) - 3)
    h = float(x[i + 1] - x[i])
    stencil = np.array([-1.0, 16.0, -30.0, 16.0, -1.0])
    return float(stencil @ y[i - 2:i + 3] / (12.0 * h ** 2))


def plateau_curvature(series: SpectrumSeries, center: float = 0.0) -> float:
    """
    Curvature at ``center`` relative to the spectrum value there.

    A squared-Lorentzian admixture flattens the top of the line; a value
    near zero marks the plateau, a positive one a dip (difference of
    Lorentzians).

    Raises:
        ValueError: fewer than 5 points or a vanishing spectrum at the center
    """
    x = np.asarray(series.omega, dtype=float)
    y = np.asarray(series.values, dtype=float)
    if x.size < 5:
        raise ValueError("plateau curvature needs at least 5 samples")
    i = int(np.argmin(np.abs(x - center)))
    if y[i] == 0:
        raise ValueError("spectrum vanishes at the center")
    return peak_curvature(x, y, center) / float(y[i])


def lineshape_analysis(series: SpectrumSeries) -> LineshapeReport:
    """
    Decompose a spectrum into powers of Lorentzians with a shared center.

    Candidate models: a single Lorentzian, two plain Lorentzians, plain +
    squared, plain + squared + cubic. Among models whose residual is within
    a factor 10 of the best one, the fewest parameters win, ties broken by
    AIC.

    Raises:
        ValueError: fewer than 5 points or a non-uniform grid
        FitConvergenceError: every start of some model failed
    """
    x = np.asarray(series.omega, dtype=float)
    y = np.asarray(series.values, dtype=float)
    if x.size < 5:
        raise ValueError("lineshape analysis needs at least 5 samples")
    steps = np.diff(x)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * abs(steps.mean()):
        raise ValueError("lineshape analysis needs an ascending uniform grid")
    start_time = time.time()

    weights = np.clip(y, 0.0, None)
    center0 = float(np.sum(x * weights) / np.sum(weights)) if weights.sum() > 0 else float(x.mean())
    above = x[y >= 0.5 * y.max()]
    width0 = max(float(above.max() - above.min()) / 2 if above.size > 1 else steps.mean(), 2 * steps.mean())

    total = float(np.sum(y ** 2))
    fits, residuals, aic = {}, {}, {}
    for name in _LINESHAPE_MODELS:
        rss, center, labels, amplitudes = _fit_model(name, x, y, center0, width0)
        fits[name] = (center, labels, amplitudes)
        residuals[name] = rss
        k = _parameter_count(name)
        aic[name] = x.size * math.log(max(rss, 1e-300) / x.size) + 2 * k

    best_rss = min(residuals.values())
    floor = max(10.0 * best_rss, 1e-20 * total)
    candidates = [name for name in _LINESHAPE_MODELS if residuals[name] <= floor]
    winner = min(candidates, key=lambda name: (_parameter_count(name), aic[name]))

    center, labels, amplitudes = fits[winner]
    components = [
        LineComponent(center=center, width=float(w), power=int(p), weight=float(abs(a)), sign=int(np.sign(a)))
        for (w, p), a in zip(labels, amplitudes)
    ]
    classification = _classify(winner, components)
    basis, _ = _basis(winner, x, center, [c.width for c in components if c.power == 1])
    reconstruction = basis @ amplitudes
    rms = float(np.sqrt(np.mean((reconstruction - y) ** 2)))
    curvature = peak_curvature(x, y, center)
    i = int(np.argmin(np.abs(x - center)))
    local_min = bool(0 < i < x.size - 1 and y[i] < y[i - 1] and y[i] < y[i + 1])

    logger.info("lineshape_fit_completed",
                winner=winner,
                classification=classification,
                residuals=residuals,
                duration_ms=int((time.time() - start_time) * 1000))
    return LineshapeReport(
        components=components,
        peak_curvature=curvature,
        classification=classification,
        winner=winner,
        residuals=residuals,
        aic=aic,
        reconstruction_rms=rms,
        center_is_local_minimum=local_min,
    )


def _classify(winner: str, components: List[LineComponent]) -> str:
    if winner == "single-lorentzian":
        return "single-lorentzian"
    scale = max(c.weight / c.width ** (2 * c.power - 1) for c in components)
    significant = [c for c in components if c.weight / c.width ** (2 * c.power - 1) > 1e-6 * scale]
    if winner == "two-lorentzians":
        if len(significant) < 2 or abs(components[0].width - components[1].width) < 1e-6 * components[0].width:
            return "single-lorentzian"
        return "sum" if significant[0].sign == significant[1].sign else "difference"
    if any(c.power == 3 for c in significant):
        return "cubic"
    if any(c.power == 2 for c in significant):
        return "squared"
    return "single-lorentzian"
