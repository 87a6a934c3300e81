"""
Two-time correlation functions and coherence.

First-order correlations follow the quantum regression theorem: the row
f_j(τ) = ⟨a_j†(0)a_k(τ)⟩ obeys the first-moment equation. Higher-order
coherence of the Gaussian steady state comes from Wick's theorem as a
permanent of first-order contractions.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from thewalrus import perm

from ..core.config import WICK_MAX_ORDER
from ..core.errors import UnstableModelError
from ..core.model import ModelSpec, ValidatedModel, ensure_validated
from ..core.runtime import get_logger
from ..utils.linalg import Propagator
from .moments import steady_state_matrix
from .nhh import build_effective_nhh, resolve_mode

logger = get_logger()

# Largest contraction matrix summed by explicit pairing enumeration.
_ENUMERATION_MAX_DIM = 8
_SERIES_LIMIT = 1e-6


@dataclass
class CorrelationSeries:
    tau: np.ndarray
    values: np.ndarray
    mode: str
    order: int
    normalization: float
    method: str = ""

    @property
    def is_real(self) -> bool:
        return self.order >= 2


def _check_tau(tau_grid: Sequence[float]) -> np.ndarray:
    tau = np.asarray(tau_grid, dtype=float).reshape(-1)
    if tau.size and (np.any(tau < 0) or np.any(np.diff(tau) < 0)):
        raise ValueError("tau grid must be ascending and nonnegative")
    return tau


def _check_stable(h: np.ndarray):
    values = np.linalg.eigvals(h)
    worst = float(values.imag.max()) if values.size else 0.0
    if worst >= 0:
        logger.error("unstable_model", max_imag_nu=worst, error_type="UnstableModelError")
        raise UnstableModelError(
            "effective Hamiltonian has an eigenvalue with Im ν ≥ 0",
            {"max_imag_nu": worst, "eigenvalues": [str(v) for v in values]},
        )


def ttcf_first_order(model: Union[ModelSpec, ValidatedModel], held_mode: int,
                     tau_grid: Sequence[float], n_th: float = None) -> np.ndarray:
    """
    f_j(τ) = exp(−i·H_eff·τ)·f_j(0) with f_j(0) the row j of C_ss.

    Args:
        model: validated model (lab frame)
        held_mode: index j of the a_j† operator held at τ = 0
        tau_grid: ascending nonnegative delays
        n_th: occupation used for C_ss (defaults to the model's)

    Returns:
        Array of shape (len(tau), N); entry [t, k] = ⟨a_j†(0) a_k(τ_t)⟩

    Raises:
        UnstableModelError: some Im ν ≥ 0
    """
    validated = ensure_validated(model)
    tau = _check_tau(tau_grid)
    h = build_effective_nhh(validated).matrix
    _check_stable(h)
    c_ss = steady_state_matrix(validated, n_th)
    propagator = Propagator(-1j * h)
    if propagator.method == "expm":
        logger.info("propagator_method_selected",
                    method=propagator.method,
                    condition_number=propagator.condition_number,
                    near_degenerate=propagator.near_degenerate)
    return propagator.apply(c_ss[held_mode], tau)


def g1(model: Union[ModelSpec, ValidatedModel], mode: Union[int, str],
       tau_grid: Sequence[float]) -> CorrelationSeries:
    """
    Normalized first-order coherence g⁽¹⁾(τ) = ⟨a†(0)a(τ)⟩/⟨a†a⟩.

    C_ss is linear in n_th, so the ratio is evaluated with unit occupation
    and holds for every n_th including the vacuum limit.
    """
    validated, index, label = resolve_mode(model, mode)
    unit = ttcf_first_order(validated, index, tau_grid, n_th=1.0)
    c_unit = steady_state_matrix(validated, 1.0)[index, index].real
    values = unit[:, index] / c_unit
    return CorrelationSeries(
        tau=_check_tau(tau_grid),
        values=values,
        mode=label,
        order=1,
        normalization=float(validated.spec.n_th * c_unit),
        method="regression",
    )


def unnormalized_ttcf(model: Union[ModelSpec, ValidatedModel], mode: Union[int, str],
                      tau_grid: Sequence[float]) -> CorrelationSeries:
    """⟨a†(0)a(τ)⟩ itself; identically zero in the vacuum."""
    validated, index, label = resolve_mode(model, mode)
    f = ttcf_first_order(validated, index, tau_grid)
    c_ss = steady_state_matrix(validated)[index, index].real
    return CorrelationSeries(tau=_check_tau(tau_grid), values=f[:, index], mode=label,
                             order=1, normalization=float(c_ss), method="regression")


def g1_bimodal_closed_form(gamma: float, gamma12: float, delta: float, omega_bar: float,
                           supermode: str, tau):
    """
    e^(−γτ/2 − iω̄τ)·(cosh(Dτ/2) ± γ₁₂·sinh(Dτ/2)/D), D = sqrt(γ₁₂² − Δ²).

    The upper sign belongs to c₁. Written with sinh(x)/x so the exceptional
    point D = 0 needs no special case beyond a short series.
    """
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    sign = {"c1": 1.0, "c2": -1.0}.get(str(supermode).lower())
    if sign is None:
        raise ValueError(f"supermode must be 'c1' or 'c2', got {supermode!r}")
    tau = np.asarray(tau, dtype=float)
    d = complex(np.sqrt(complex(gamma12 ** 2 - delta ** 2)))
    x = d * tau / 2
    small = np.abs(d) * tau < _SERIES_LIMIT
    safe_x = np.where(small, 1.0, x)
    sinhc = np.where(small, 1 + x ** 2 / 6, np.sinh(safe_x) / safe_x)
    envelope = np.exp(-0.5 * gamma * tau - 1j * omega_bar * tau)
    value = envelope * (np.cosh(x) + sign * gamma12 * (tau / 2) * sinhc)
    return value if value.ndim else complex(value)


def permanent_by_pairing(matrix: np.ndarray) -> complex:
    """Permanent as a sum over all creation/annihilation pairings."""
    matrix = np.asarray(matrix)
    n = matrix.shape[0]
    total = 0j
    for sigma in itertools.permutations(range(n)):
        product = 1 + 0j
        for row, col in enumerate(sigma):
            product *= matrix[row, col]
        total += product
    return total


def contraction_matrix(g1_value: complex, k: int) -> np.ndarray:
    """
    Contractions of a†^k(0) a†^k(τ) a^k(τ) a^k(0), normalized by n̄.

    Rows are the creation times (k at 0, k at τ), columns the annihilation
    times (k at 0, k at τ).
    """
    ones = np.ones((k, k), dtype=complex)
    return np.block([[ones, g1_value * ones], [np.conj(g1_value) * ones, ones]])


def _check_order(k: int):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"order k must be a positive integer, got {k!r}")
    if k > WICK_MAX_ORDER:
        raise ValueError(f"order k = {k} exceeds the permanent cost guard ({WICK_MAX_ORDER})")


def g2k_wick(g1_value: complex, k: int, method: str = "auto") -> float:
    """
    Normalized g⁽²ᵏ⁾ of a thermal field from its first-order coherence.

    Args:
        g1_value: g⁽¹⁾ at the delay of interest
        k: half the coherence order
        method: "enumerate" sums all pairings, "ryser" uses thewalrus;
            "auto" enumerates up to 2k = 8

    Raises:
        ValueError: |g1| > 1, or k outside 1…WICK_MAX_ORDER
    """
    _check_order(k)
    if abs(g1_value) > 1 + 1e-9:
        raise ValueError(f"|g1| must not exceed 1, got {abs(g1_value)!r}")
    matrix = contraction_matrix(complex(g1_value), int(k))
    if method == "auto":
        method = "enumerate" if matrix.shape[0] <= _ENUMERATION_MAX_DIM else "ryser"
    if method == "enumerate":
        value = permanent_by_pairing(matrix)
    elif method == "ryser":
        value = perm(matrix)
    else:
        raise ValueError(f"unknown permanent method {method!r}")
    return float(np.real(value))


def g2k_power_terms(g1_value: complex, k: int) -> np.ndarray:
    """
    Terms (k!)²·C(k,m)²·|g₁|^(2m), m = 0…k, summing to g⁽²ᵏ⁾.

    The m = k term carries the highest power of the EP polynomial and the
    fastest envelope e^(2k·Im ν·τ); lower terms decay more slowly.
    """
    _check_order(k)
    weight = math.factorial(k) ** 2
    g2 = abs(g1_value) ** 2
    return np.array([weight * math.comb(k, m) ** 2 * g2 ** m for m in range(k + 1)])


def g2k(model: Union[ModelSpec, ValidatedModel], mode: Union[int, str], k: int,
        tau_grid: Sequence[float]) -> CorrelationSeries:
    """Series of g⁽²ᵏ⁾(τ) from the regression-theorem g⁽¹⁾."""
    _check_order(k)
    first = g1(model, mode, tau_grid)
    clipped = np.minimum(np.abs(first.values), 1.0) * np.exp(1j * np.angle(first.values))
    values = np.array([g2k_wick(v, k, method="ryser") for v in clipped])
    return CorrelationSeries(
        tau=first.tau,
        values=values.astype(complex),
        mode=first.mode,
        order=2 * k,
        normalization=first.normalization,
        method="wick",
    )
