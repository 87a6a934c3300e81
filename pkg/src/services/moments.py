"""
Moment evolution generators.

First moments ⟨a_k⟩ evolve with −i·H_eff. Second moments C_jk = ⟨a_j†a_k⟩
obey Ċ = i·H_eff*·C − i·C·H_effᵀ + n_th·γᵀ, vectorized row-major over
(j, k). The NHH-only variant keeps the commutator with H_eff† and drops the
refilling terms.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from ..core.errors import NoSteadyStateError
from ..core.model import ModelSpec, ValidatedModel, ensure_validated
from ..core.runtime import get_logger
from .nhh import (
    SIGMA_X,
    EigenReport,
    Frame,
    SymmetryReport,
    build_effective_nhh,
    classify_symmetry,
    eigendecompose,
    pt_residuals,
    rotation,
)

logger = get_logger()

LIOUVILLIAN = "liouvillian"
NHH_ONLY = "nhh-only"

# Parity on the ⟨c_j†c_k⟩ basis: swap both mode labels.
MOMENT_PARITY = np.kron(SIGMA_X, SIGMA_X)


@dataclass(frozen=True)
class MomentSystem:
    """dv/dt = generator·v + n_th·noise over the labelled basis."""

    generator: np.ndarray
    noise: np.ndarray
    n_th: float
    basis: Tuple[str, ...]
    formalism: str = LIOUVILLIAN

    @property
    def drive(self) -> np.ndarray:
        return self.n_th * self.noise

    @property
    def dim(self) -> int:
        return int(self.generator.shape[0])

    @property
    def n_modes(self) -> int:
        return int(round(math.sqrt(self.dim)))


@dataclass
class MultiplicityReport:
    eigenvalue: complex
    algebraic: int
    geometric: int
    jordan_blocks: List[int]
    lep_order: int


def _labels(prefix: str, n: int) -> Tuple[str, ...]:
    return tuple(f"{prefix}{j + 1}^dag {prefix}{k + 1}" for j in range(n) for k in range(n))


def first_moment_generator(model: Union[ModelSpec, ValidatedModel], frame: Frame = Frame.LAB) -> MomentSystem:
    """d⟨a⟩/dt = −i·H_eff·⟨a⟩, no drive."""
    h = build_effective_nhh(model, frame).matrix
    n = h.shape[0]
    return MomentSystem(
        generator=-1j * h,
        noise=np.zeros(n, dtype=complex),
        n_th=ensure_validated(model).spec.n_th,
        basis=tuple(f"a{k + 1}" for k in range(n)),
        formalism=LIOUVILLIAN,
    )


def second_moment_system(model: Union[ModelSpec, ValidatedModel]) -> MomentSystem:
    """
    Liouvillian second-moment generator and thermal noise vector.

    Row-major vectorization of Ċ = i·H*·C − i·C·Hᵀ + n_th·γᵀ gives
    generator = i·(H* ⊗ I) − i·(I ⊗ H) and noise = vec(γᵀ).
    """
    spec = ensure_validated(model).spec
    h = build_effective_nhh(spec).matrix
    n = spec.n_modes
    identity = np.eye(n)
    generator = 1j * np.kron(h.conj(), identity) - 1j * np.kron(identity, h)
    return MomentSystem(
        generator=generator,
        noise=spec.gamma.T.reshape(-1).astype(complex),
        n_th=spec.n_th,
        basis=_labels("a", n),
        formalism=LIOUVILLIAN,
    )


def nhh_second_moment_system(model: Union[ModelSpec, ValidatedModel]) -> MomentSystem:
    """
    Second moments under the bare effective Hamiltonian.

    d⟨O⟩/dt = i⟨[H_eff†, O]⟩ with O = a_j†a_k, i.e. the Heisenberg picture
    without quantum jumps; the generator is shifted by +γ relative to the
    Liouvillian one for the symmetric two-mode family.
    """
    spec = ensure_validated(model).spec
    h = build_effective_nhh(spec).matrix
    n = spec.n_modes
    identity = np.eye(n)
    h_dag = h.conj().T
    generator = 1j * np.kron(h.conj(), identity) - 1j * np.kron(identity, h_dag)
    return MomentSystem(
        generator=generator,
        noise=np.zeros(n * n, dtype=complex),
        n_th=spec.n_th,
        basis=_labels("a", n),
        formalism=NHH_ONLY,
    )


def supermode_matrix(theta: float = math.pi / 4) -> np.ndarray:
    """T = R(θ) ⊗ R(θ), orthogonal, acting on row-major two-mode moments."""
    r = rotation(theta)
    return np.kron(r, r)


def transform_to_supermodes(system: MomentSystem, theta: float = math.pi / 4) -> MomentSystem:
    """N = T·M·T⁻¹ and d = T·b in the ⟨c_j†c_k⟩ basis."""
    if system.dim != 4:
        raise ValueError(f"supermode transform needs a 4-dimensional moment system, got {system.dim}")
    t = supermode_matrix(theta)
    return MomentSystem(
        generator=t @ system.generator @ t.T,
        noise=t @ system.noise,
        n_th=system.n_th,
        basis=_labels("c", 2),
        formalism=system.formalism,
    )


def steady_state_moments(system: MomentSystem, n_th: Optional[float] = None) -> np.ndarray:
    """
    Solve generator·C + n_th·noise = 0.

    Raises:
        ValueError: called on an NHH-only system
        NoSteadyStateError: the generator is singular
    """
    if system.formalism != LIOUVILLIAN:
        raise ValueError("steady states are defined for the Liouvillian formalism only")
    n_th = system.n_th if n_th is None else float(n_th)
    rhs = -n_th * system.noise
    cond = float(np.linalg.cond(system.generator))
    if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
        logger.error("steady_state_failed", condition_number=cond, error_type="NoSteadyStateError")
        raise NoSteadyStateError(
            "moment generator is singular: no unique steady state",
            {"condition_number": cond},
        )
    solution = np.linalg.solve(system.generator, rhs)
    logger.debug("steady_state_solved", n_th=n_th, condition_number=cond)
    return solution


def steady_state_matrix(model: Union[ModelSpec, ValidatedModel], n_th: Optional[float] = None) -> np.ndarray:
    """C_ss as an N×N matrix, C_jk = ⟨a_j†a_k⟩."""
    system = second_moment_system(model)
    n = system.n_modes
    return steady_state_moments(system, n_th).reshape(n, n)


def multiplicity_report(system: Union[MomentSystem, np.ndarray], tol: Optional[float] = None) -> List[MultiplicityReport]:
    """Per coalesced eigenvalue: multiplicities, Jordan blocks and LEP order."""
    generator = system.generator if isinstance(system, MomentSystem) else np.asarray(system)
    report: EigenReport = eigendecompose(generator, tol)
    rows = []
    for cluster in report.clusters:
        lep_order = max(cluster.jordan_blocks) if cluster.is_defective else 1
        rows.append(MultiplicityReport(
            eigenvalue=cluster.value,
            algebraic=cluster.algebraic,
            geometric=cluster.geometric,
            jordan_blocks=list(cluster.jordan_blocks),
            lep_order=lep_order,
        ))
    return rows


def check_moment_symmetry(system: MomentSystem, gauged: bool = False,
                          gauge_rate: Optional[float] = None) -> SymmetryReport:
    """
    PT diagnostics of i·M with P = σ_x ⊗ σ_x and T = complex conjugation.

    The anti-PT residual is ‖P(iM)*P + iM‖; with ``gauged`` the PT residual
    is computed for i·(M + g·I), g the mean diagonal decay −Re M_jj unless
    given.
    """
    if system.dim != 4:
        raise ValueError(f"moment symmetry check needs a 4-dimensional system, got {system.dim}")
    m = system.generator
    if gauged and gauge_rate is None:
        gauge_rate = float(np.mean(-np.diag(m).real))
    shift = gauge_rate if gauged else 0.0
    anti, pt = pt_residuals(1j * m, MOMENT_PARITY, shift=1j * shift)
    norm = float(np.linalg.norm(m))
    return SymmetryReport(
        anti_pt_residual=anti,
        pt_residual_after_gauge=pt,
        gauge_rate=float(shift),
        classification=classify_symmetry(anti, pt, norm, gauged=gauged),
        norm=norm,
    )


def bimodal_liouvillian_eigenvalues(gamma: float, gamma12: float, delta: float) -> np.ndarray:
    """Second-moment spectrum {−γ + D, −γ − D, −γ, −γ} of the two-mode family."""
    d = complex(np.sqrt(complex(gamma12 ** 2 - delta ** 2)))
    return np.array([-gamma + d, -gamma - d, -gamma, -gamma], dtype=complex)
