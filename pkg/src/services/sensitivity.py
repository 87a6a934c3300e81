"""
Eigenvalue sweeps and exceptional-point sensitivity.

Branches are continued across a parameter grid by minimal-distance
assignment; the splitting of a coalesced cluster under a small
perturbation ε is fitted on log-log axes to Δλ = C·ε^(1/p).
"""

import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats
from scipy.optimize import bisect, linear_sum_assignment

from ..core.config import REAL_TOL
from ..core.errors import SensitivityError
from ..core.model import ModelSpec, ValidatedModel, ensure_validated
from ..core.runtime import get_logger
from ..utils.linalg import cluster_radius, matrix_scale, rounding_radius, safe_eig
from .moments import first_moment_generator, nhh_second_moment_system, second_moment_system
from .nhh import EigenReport, build_effective_nhh, eigendecompose, hep_locus_bimodal

logger = get_logger()

PARAMETERS = ("gamma12", "gamma", "omega1", "omega2")
GENERATORS = ("nhh", "moments", "nhh-moments")

MIN_FIT_POINTS = 8
MIN_FIT_DECADES = 2.0


@dataclass
class BranchTrajectories:
    parameter: str
    generator: str
    grid: np.ndarray
    values: np.ndarray
    ambiguous: List[int] = field(default_factory=list)


@dataclass
class SplittingFit:
    parameter: str
    generator: str
    direction: int
    base_eigenvalue: complex
    cluster_size: int
    epsilons: np.ndarray
    splittings: np.ndarray
    distances: np.ndarray
    centroid_shifts: np.ndarray
    real_flags: np.ndarray
    lep_branch_real_flags: np.ndarray
    noise_floor: float
    exponent: float = float("nan")
    p: float = float("nan")
    p_interval: Tuple[float, float] = (float("nan"), float("nan"))
    rms_residual: float = float("nan")
    fit_mask: Optional[np.ndarray] = None

    @property
    def below_floor(self) -> bool:
        """No sample split beyond numerical noise."""
        return bool(np.all(self.splittings <= self.noise_floor))


def set_parameter(model: Union[ModelSpec, ValidatedModel], name: str, value: float) -> ModelSpec:
    """Copy of a two-mode model with one named parameter replaced."""
    spec = ensure_validated(model).spec
    if name not in PARAMETERS:
        raise ValueError(f"unknown parameter {name!r}; use one of {', '.join(PARAMETERS)}")
    if spec.n_modes != 2:
        raise ValueError(f"parameter {name!r} is defined for two-mode models")
    if name == "gamma12":
        gamma = np.array(spec.gamma)
        gamma[0, 1] = gamma[1, 0] = value
        return spec.replace(gamma=gamma)
    if name == "gamma":
        gamma = np.array(spec.gamma)
        gamma[0, 0] = gamma[1, 1] = value
        return spec.replace(gamma=gamma)
    omega = np.array(spec.omega)
    omega[0 if name == "omega1" else 1] = value
    return spec.replace(omega=omega)


def get_parameter(model: Union[ModelSpec, ValidatedModel], name: str) -> float:
    spec = ensure_validated(model).spec
    if name == "gamma12":
        return float(spec.gamma[0, 1].real)
    if name == "gamma":
        return float(spec.gamma[0, 0].real)
    if name in ("omega1", "omega2"):
        return float(spec.omega[0 if name == "omega1" else 1])
    raise ValueError(f"unknown parameter {name!r}; use one of {', '.join(PARAMETERS)}")


def parameter_family(model: Union[ModelSpec, ValidatedModel], name: str) -> Callable[[float], ModelSpec]:
    return lambda value: set_parameter(model, name, value)


def generator_matrix(model: Union[ModelSpec, ValidatedModel], generator: str) -> np.ndarray:
    """
    The matrix whose eigenvalues are tracked.

    ``nhh`` gives ν of H_eff for sweeps; ``moments`` and ``nhh-moments`` the
    Liouvillian and NHH-only second-moment generators.
    """
    if generator == "nhh":
        return build_effective_nhh(model).matrix
    if generator == "moments":
        return second_moment_system(model).generator
    if generator == "nhh-moments":
        return nhh_second_moment_system(model).generator
    raise ValueError(f"unknown generator {generator!r}; use one of {', '.join(GENERATORS)}")


def sweep_eigenvalues(family: Callable[[float], Union[ModelSpec, ValidatedModel]], grid: Sequence[float],
                      generator: str = "nhh", parameter: str = "") -> BranchTrajectories:
    """
    Follow eigenvalue branches across a sorted parameter grid.

    Adjacent grid points are matched with the Hungarian assignment on
    |λ_prev − λ_next|. Points where two eigenvalues are degenerate within the
    clustering radius are listed in ``ambiguous``; there the assignment is
    arbitrary inside the cluster.

    Raises:
        ValueError: grid not monotonic or empty
    """
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise ValueError("sweep grid is empty")
    steps = np.diff(grid)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise ValueError("sweep grid must be strictly monotonic")
    start_time = time.time()

    rows, ambiguous = [], []
    for i, value in enumerate(grid):
        matrix = generator_matrix(ensure_validated(family(float(value))), generator)
        eigenvalues, _ = safe_eig(matrix)
        if rows:
            cost = np.abs(rows[-1][:, None] - eigenvalues[None, :])
            _, columns = linear_sum_assignment(cost)
            eigenvalues = eigenvalues[columns]
        else:
            eigenvalues = eigenvalues[np.lexsort((eigenvalues.imag, eigenvalues.real))]
        gaps = np.abs(eigenvalues[:, None] - eigenvalues[None, :]) + np.diag(np.full(len(eigenvalues), np.inf))
        scale = matrix_scale(matrix)
        resolution = max(cluster_radius(scale), rounding_radius(len(eigenvalues), scale))
        if len(eigenvalues) > 1 and gaps.min() < resolution:
            ambiguous.append(i)
        rows.append(eigenvalues)

    if ambiguous:
        logger.info("sweep_degenerate_points", generator=generator, count=len(ambiguous),
                    parameter_values=[float(grid[i]) for i in ambiguous[:10]])
    logger.info("eigenvalue_sweep_completed",
                generator=generator,
                parameter=parameter,
                points=int(grid.size),
                duration_ms=int((time.time() - start_time) * 1000))
    return BranchTrajectories(parameter=parameter, generator=generator, grid=grid,
                              values=np.array(rows), ambiguous=ambiguous)


def _noise_floor(dim: int, scale: float, block: int) -> float:
    """Eigenvalue scatter of an order-``block`` defective cluster at machine precision."""
    return 10.0 * (dim * np.finfo(float).eps) ** (1.0 / block) * scale


def _sensitivity_matrix(model: Union[ModelSpec, ValidatedModel], generator: str) -> np.ndarray:
    # λ = −iν for the Hamiltonian so both generators share the Liouvillian convention.
    if generator == "nhh":
        return first_moment_generator(model).generator
    if generator == "moments":
        return second_moment_system(model).generator
    raise ValueError(f"splitting analysis supports generators 'nhh' and 'moments', got {generator!r}")


def splitting_exponent(model_at_ep: Union[ModelSpec, ValidatedModel], parameter: str,
                       epsilons: Sequence[float], generator: str = "moments",
                       direction: int = 1) -> SplittingFit:
    """
    Fit the splitting of the coalesced cluster under parameter += direction·ε.

    The cluster is the largest defective one of the base generator; at each ε
    its ``algebraic`` members are the eigenvalues nearest the base value.

    Args:
        model_at_ep: model sitting on the exceptional point
        parameter: one of gamma12, gamma, omega1, omega2
        epsilons: positive perturbation sizes, ≥ 8 spanning ≥ 2 decades
        generator: ``nhh`` (λ = −iν) or ``moments``
        direction: +1 or −1

    Raises:
        ValueError: bad ε grid, direction or parameter
        SensitivityError: no defective cluster at the base point, the
            cluster merged with other eigenvalues, or too few samples rose
            above the numerical floor to fit
    """
    if direction not in (1, -1):
        raise ValueError(f"direction must be +1 or -1, got {direction!r}")
    eps = np.asarray(epsilons, dtype=float).reshape(-1)
    if eps.size < MIN_FIT_POINTS or np.any(eps <= 0):
        raise ValueError(f"need at least {MIN_FIT_POINTS} positive epsilons")
    if math.log10(eps.max() / eps.min()) < MIN_FIT_DECADES:
        raise ValueError(f"epsilons must span at least {MIN_FIT_DECADES:g} decades")
    eps = np.sort(eps)
    start_time = time.time()

    base = ensure_validated(model_at_ep)
    base_matrix = _sensitivity_matrix(base, generator)
    report: EigenReport = eigendecompose(base_matrix)
    defective = report.defective_clusters
    if not defective:
        raise SensitivityError("base model is not at an exceptional point",
                               {"generator": generator, "eigenvalues": [str(v) for v in report.eigenvalues]})
    cluster = max(defective, key=lambda c: (max(c.jordan_blocks), c.algebraic))
    lam0, size = cluster.value, cluster.algebraic
    block = max(cluster.jordan_blocks)
    floor = _noise_floor(base_matrix.shape[0], report.scale, block)
    value0 = get_parameter(base, parameter)

    splittings, distances, shifts, flags, lep_flags = [], [], [], [], []
    for e in eps:
        perturbed = ensure_validated(set_parameter(base, parameter, value0 + direction * e))
        values, _ = safe_eig(_sensitivity_matrix(perturbed, generator))
        order = np.argsort(np.abs(values - lam0))
        members, others = values[order[:size]], values[order[size:]]
        reach = float(np.abs(members - lam0).max())
        if others.size and float(np.abs(others - lam0).min()) <= reach:
            logger.error("sensitivity_cluster_merged", epsilon=float(e), reach=reach,
                         error_type="SensitivityError")
            raise SensitivityError("perturbed cluster merged with other eigenvalues",
                                   {"epsilon": float(e), "cluster_reach": reach,
                                    "nearest_other": float(np.abs(others - lam0).min())})
        members = members[np.argsort(members.imag)]
        splittings.append(float(np.abs(members[:, None] - members[None, :]).max()))
        distances.append(reach)
        shifts.append(complex(members.mean() - lam0))
        flags.append(np.abs(members.imag) < REAL_TOL * max(1.0, abs(lam0)))
        # The leading block splits fastest: its branch is the block members farthest from λ0.
        branch = members[np.argsort(np.abs(members - lam0), kind="stable")[-block:]]
        branch = branch[np.argsort(branch.imag)]
        lep_flags.append(np.abs(branch.imag) < REAL_TOL * max(1.0, abs(lam0)))

    fit = SplittingFit(
        parameter=parameter,
        generator=generator,
        direction=direction,
        base_eigenvalue=complex(lam0),
        cluster_size=size,
        epsilons=eps,
        splittings=np.array(splittings),
        distances=np.array(distances),
        centroid_shifts=np.array(shifts),
        real_flags=np.array(flags),
        lep_branch_real_flags=np.array(lep_flags),
        noise_floor=floor,
    )
    if fit.below_floor:
        logger.info("splitting_below_noise_floor", parameter=parameter, generator=generator,
                    noise_floor=floor, max_splitting=float(fit.splittings.max()))
        return fit

    mask = fit.splittings > floor
    if mask.sum() < MIN_FIT_POINTS or math.log10(eps[mask].max() / eps[mask].min()) < MIN_FIT_DECADES:
        raise SensitivityError("too few splittings above the numerical floor to fit",
                               {"points_above_floor": int(mask.sum()), "noise_floor": floor})
    x, y = np.log10(eps[mask]), np.log10(fit.splittings[mask])
    regression = stats.linregress(x, y)
    slope = float(regression.slope)
    half_width = float(stats.t.ppf(0.975, mask.sum() - 2) * regression.stderr)
    residual = y - (regression.intercept + slope * x)

    fit.exponent = slope
    fit.p = 1.0 / slope
    fit.p_interval = (1.0 / (slope + half_width), 1.0 / (slope - half_width) if slope > half_width else math.inf)
    fit.rms_residual = float(np.sqrt(np.mean(residual ** 2)))
    fit.fit_mask = mask
    logger.info("splitting_fit_completed",
                parameter=parameter,
                generator=generator,
                direction=direction,
                p=fit.p,
                rms_residual=fit.rms_residual,
                duration_ms=int((time.time() - start_time) * 1000))
    return fit


def two_mode_discriminant(model: Union[ModelSpec, ValidatedModel]) -> float:
    """Re D² = −Re(tr² − 4·det) of a two-mode H_eff; zero on the exceptional point."""
    h = build_effective_nhh(model).matrix
    if h.shape != (2, 2):
        raise ValueError(f"discriminant is defined for two modes, got {h.shape[0]}")
    return float(-(np.trace(h) ** 2 - 4 * np.linalg.det(h)).real)


def locate_exceptional_point(model: Union[ModelSpec, ValidatedModel], parameter: str = "gamma12",
                             lower: Optional[float] = None, upper: Optional[float] = None,
                             xtol: float = 1e-15) -> Tuple[float, Optional[float]]:
    """
    Bisect the discriminant along one parameter.

    Returns the bisection root and, for the symmetric two-mode family swept
    in γ₁₂, the closed-form locus |Δ|.

    Raises:
        SensitivityError: the discriminant does not change sign on the bracket
    """
    base = ensure_validated(model)
    spec = base.spec
    if lower is None or upper is None:
        if parameter != "gamma12":
            raise ValueError("a bracket is required unless sweeping gamma12")
        lower, upper = 0.0, float(spec.gamma[0, 0].real)

    def discriminant(value):
        return two_mode_discriminant(set_parameter(base, parameter, value))

    f_lower, f_upper = discriminant(lower), discriminant(upper)
    if f_lower * f_upper > 0:
        logger.error("ep_bracket_failed", lower=lower, upper=upper, error_type="SensitivityError")
        raise SensitivityError("discriminant does not change sign on the bracket",
                               {"lower": lower, "upper": upper, "f_lower": f_lower, "f_upper": f_upper})
    root = float(bisect(discriminant, lower, upper, xtol=xtol, maxiter=200))

    closed_form = None
    symmetric = (spec.n_modes == 2 and spec.gamma[0, 0] == spec.gamma[1, 1]
                 and not np.any(spec.chi) and parameter == "gamma12")
    if symmetric:
        closed_form = hep_locus_bimodal(spec.omega[0] - spec.omega[1])
    logger.info("exceptional_point_located", parameter=parameter, bisection=root, closed_form=closed_form)
    return root, closed_form
