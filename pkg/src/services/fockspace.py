"""
Truncated Fock-space Liouvillian oracle.

Builds the full Lindblad superoperator of a model on a per-mode photon
cutoff, with column-stacking vectorization (A·ρ·B ↔ Bᵀ ⊗ A). The generator
conserves q = Σn − Σm of |n⟩⟨m|, so steady states, spectra and propagation
all run on the dense U(1) sector blocks.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.optimize import linear_sum_assignment

from ..core.config import CUTOFF_LEAKAGE_WARN, FOCK_MEMORY_BUDGET_MB
from ..core.errors import MemoryBudgetError, NoSteadyStateError
from ..core.model import ModelSpec, ValidatedModel, ensure_validated
from ..core.runtime import get_logger
from ..utils.linalg import matrix_scale, rank_threshold, safe_eig
from .correlations import CorrelationSeries, _check_tau
from .nhh import rotation

logger = get_logger()

MAX_ORACLE_MODES = 3
_BYTES_PER_ENTRY = 16


@dataclass
class FockSuperoperator:
    model: ValidatedModel
    cutoff: int
    superoperator: sparse.csr_matrix
    annihilators: List[sparse.csr_matrix]
    occupations: np.ndarray
    sectors: Dict[int, np.ndarray]
    _step_cache: Dict = field(default_factory=dict, repr=False)

    @property
    def n_modes(self) -> int:
        return len(self.annihilators)

    @property
    def dim(self) -> int:
        """Hilbert-space dimension Π(N_c + 1)."""
        return int(self.occupations.shape[0])

    def block(self, q: int) -> np.ndarray:
        index = self.sectors[q]
        return self.superoperator[index][:, index].toarray()


@dataclass
class DensityMatrix:
    matrix: np.ndarray
    cutoff: int
    occupations: np.ndarray

    def expectation(self, operator) -> complex:
        op = operator.toarray() if sparse.issparse(operator) else np.asarray(operator)
        return complex(np.trace(op @ self.matrix))

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix).min())

    def boundary_population(self) -> float:
        """Population of states with some mode at the cutoff."""
        on_shell = np.any(self.occupations == self.cutoff, axis=1)
        return float(np.diag(self.matrix).real[on_shell].sum())


@dataclass
class LiouvillianMode:
    eigenvalue: complex
    sector: int
    matrix: np.ndarray


def _annihilator(cutoff: int) -> sparse.csr_matrix:
    return sparse.diags(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1, format="csr").astype(complex)


def _mode_annihilators(n_modes: int, cutoff: int) -> List[sparse.csr_matrix]:
    local = cutoff + 1
    operators = []
    for j in range(n_modes):
        factors = [sparse.identity(local, dtype=complex, format="csr")] * n_modes
        factors[j] = _annihilator(cutoff)
        op = factors[0]
        for factor in factors[1:]:
            op = sparse.kron(op, factor, format="csr")
        operators.append(op)
    return operators


def spre(a: sparse.spmatrix) -> sparse.csr_matrix:
    return sparse.kron(sparse.identity(a.shape[0], format="csr"), a, format="csr")


def spost(b: sparse.spmatrix) -> sparse.csr_matrix:
    return sparse.kron(b.T, sparse.identity(b.shape[0], format="csr"), format="csr")


def sprepost(a: sparse.spmatrix, b: sparse.spmatrix) -> sparse.csr_matrix:
    """A·ρ·B."""
    return sparse.kron(b.T, a, format="csr")


def dense_size_mb(n_modes: int, cutoff: int) -> float:
    liouville_dim = (cutoff + 1) ** (2 * n_modes)
    return liouville_dim ** 2 * _BYTES_PER_ENTRY / 2 ** 20


def build_superoperator(model: Union[ModelSpec, ValidatedModel], cutoff: int,
                        budget_mb: Optional[float] = None) -> FockSuperoperator:
    """
    Lindblad generator −i[H,·] + loss and gain dissipators on a Fock cutoff.

    Loss: (n_th+1)/2·Σ γ_jk (2a_k ρ a_j† − {a_j†a_k, ρ}).
    Gain: n_th/2·Σ γ_jk (2a_j† ρ a_k − {a_k a_j†, ρ}).

    Args:
        model: validated model, at most three modes
        cutoff: largest photon number per mode
        budget_mb: dense-equivalent memory limit (FOCK_MEMORY_BUDGET_MB)

    Raises:
        ValueError: cutoff < 1 or too many modes
        MemoryBudgetError: the dense superoperator would exceed the budget
    """
    validated = ensure_validated(model)
    spec = validated.spec
    if isinstance(cutoff, bool) or not isinstance(cutoff, (int, np.integer)) or cutoff < 1:
        raise ValueError(f"cutoff must be an integer ≥ 1, got {cutoff!r}")
    if spec.n_modes > MAX_ORACLE_MODES:
        raise ValueError(f"the Fock oracle handles at most {MAX_ORACLE_MODES} modes, got {spec.n_modes}")
    budget = FOCK_MEMORY_BUDGET_MB if budget_mb is None else budget_mb
    required = dense_size_mb(spec.n_modes, cutoff)
    if required > budget:
        logger.error("fock_build_failed", required_mb=required, budget_mb=budget,
                     error_type="MemoryBudgetError")
        raise MemoryBudgetError(
            f"superoperator needs {required:.0f} MB, budget is {budget:.0f} MB",
            {"required_mb": required, "budget_mb": budget, "cutoff": int(cutoff), "n_modes": spec.n_modes},
        )

    start_time = time.time()
    cutoff = int(cutoff)
    ops = _mode_annihilators(spec.n_modes, cutoff)
    dags = [a.conj().T.tocsr() for a in ops]
    h = spec.hamiltonian
    gamma = spec.gamma
    n_th = spec.n_th

    hamiltonian = sparse.csr_matrix(ops[0].shape, dtype=complex)
    for j in range(spec.n_modes):
        for k in range(spec.n_modes):
            if h[j, k] != 0:
                hamiltonian = hamiltonian + h[j, k] * (dags[j] @ ops[k])
    generator = -1j * (spre(hamiltonian) - spost(hamiltonian))

    for j in range(spec.n_modes):
        for k in range(spec.n_modes):
            rate = gamma[j, k]
            if rate == 0:
                continue
            number = (dags[j] @ ops[k]).tocsr()
            generator = generator + rate * (n_th + 1) / 2 * (
                2 * sprepost(ops[k], dags[j]) - spre(number) - spost(number))
            if n_th > 0:
                reverse = (ops[k] @ dags[j]).tocsr()
                generator = generator + rate * n_th / 2 * (
                    2 * sprepost(dags[j], ops[k]) - spre(reverse) - spost(reverse))

    local = cutoff + 1
    occupations = np.array(np.unravel_index(np.arange(local ** spec.n_modes), (local,) * spec.n_modes)).T
    total = occupations.sum(axis=1)
    d = occupations.shape[0]
    flat = np.arange(d * d)
    charge = total[flat % d] - total[flat // d]
    sectors = {int(q): np.flatnonzero(charge == q) for q in np.unique(charge)}

    sop = FockSuperoperator(
        model=validated,
        cutoff=cutoff,
        superoperator=generator.tocsr(),
        annihilators=ops,
        occupations=occupations,
        sectors=sectors,
    )
    logger.info("fock_superoperator_built",
                n_modes=spec.n_modes,
                cutoff=cutoff,
                liouville_dim=d * d,
                largest_sector=max(len(v) for v in sectors.values()),
                duration_ms=int((time.time() - start_time) * 1000))
    return sop


def trace_residual(sop: FockSuperoperator) -> float:
    """max |vec(I)ᵀ·L|, zero for a trace-preserving generator."""
    identity = np.eye(sop.dim, dtype=complex).reshape(-1, order="F")
    return float(np.abs(sop.superoperator.T @ identity).max())


def apply_generator(sop: FockSuperoperator, rho: np.ndarray) -> np.ndarray:
    """L[ρ] as a d×d matrix."""
    vector = np.asarray(rho, dtype=complex).reshape(-1, order="F")
    return (sop.superoperator @ vector).reshape(sop.dim, sop.dim, order="F")


def steady_state_density(sop: FockSuperoperator) -> DensityMatrix:
    """
    Null vector of the q = 0 block, Hermitized and trace-normalized.

    Raises:
        NoSteadyStateError: the null space is empty or degenerate
    """
    block = sop.block(0)
    scale = matrix_scale(block)
    threshold = rank_threshold(block.shape[0], scale)
    _, singular, vh = np.linalg.svd(block)
    if singular[-1] > threshold or (len(singular) > 1 and singular[-2] <= threshold):
        logger.error("fock_steady_state_failed",
                     smallest_singular_values=[float(s) for s in singular[-2:]],
                     threshold=threshold,
                     error_type="NoSteadyStateError")
        raise NoSteadyStateError(
            "stationary state is not unique on the truncated space",
            {"smallest_singular_values": [float(s) for s in singular[-2:]], "threshold": threshold},
        )

    vector = np.zeros(sop.dim * sop.dim, dtype=complex)
    vector[sop.sectors[0]] = vh[-1].conj()
    rho = vector.reshape(sop.dim, sop.dim, order="F")
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    density = DensityMatrix(matrix=rho, cutoff=sop.cutoff, occupations=sop.occupations)

    leakage = density.boundary_population()
    if leakage > CUTOFF_LEAKAGE_WARN:
        logger.warning("fock_cutoff_leakage", boundary_population=leakage, cutoff=sop.cutoff)
    if density.min_eigenvalue < -1e-8:
        logger.warning("fock_steady_state_not_psd", min_eigenvalue=density.min_eigenvalue)
    return density


def _sector_eigensystems(sop: FockSuperoperator, vectors: bool):
    for q, index in sorted(sop.sectors.items()):
        values, right = safe_eig(sop.block(q))
        yield q, index, values, (right if vectors else None)


def sector_spectrum(sop: FockSuperoperator, q: int) -> np.ndarray:
    """Eigenvalues of the sector with Σn − Σm = q."""
    if q not in sop.sectors:
        raise ValueError(f"no sector q = {q} at cutoff {sop.cutoff}")
    return safe_eig(sop.block(q))[0]


def spectral_deviation(found: Sequence[complex], expected: Sequence[complex], group_tol: float = 1e-9) -> float:
    """
    Largest distance between expected eigenvalues and their matched computed ones.

    Matching is a minimal-distance assignment. Coinciding expected values
    are compared through the mean of their matches, which stays accurate at
    defective points where the individual eigenvalues scatter.
    """
    found = np.asarray(found, dtype=complex)
    expected = np.asarray(expected, dtype=complex)
    if expected.size > found.size:
        raise ValueError(f"{expected.size} expected eigenvalues but only {found.size} computed")
    rows, cols = linear_sum_assignment(np.abs(expected[:, None] - found[None, :]))
    matched = np.empty(expected.size, dtype=complex)
    matched[rows] = found[cols]

    deviation = 0.0
    done = np.zeros(expected.size, dtype=bool)
    for i in range(expected.size):
        if done[i]:
            continue
        group = np.abs(expected - expected[i]) < group_tol * max(1.0, abs(expected[i]))
        done |= group
        deviation = max(deviation, float(abs(matched[group].mean() - expected[i])))
    return deviation


def spectrum_subset(sop: FockSuperoperator, count: int) -> np.ndarray:
    """The ``count`` Liouvillian eigenvalues of smallest |Re λ|."""
    liouville_dim = sop.dim * sop.dim
    if count < 1 or count > liouville_dim:
        raise ValueError(f"count must be in 1…{liouville_dim}, got {count}")
    values = np.concatenate([v for _, _, v, _ in _sector_eigensystems(sop, vectors=False)])
    order = np.lexsort((values.imag, np.abs(values.real)))
    return values[order[:count]]


def liouvillian_eigenmatrices(sop: FockSuperoperator, count: int) -> List[LiouvillianMode]:
    """Right eigenmatrices ρ_i (unit Frobenius norm) for the ``count`` slowest eigenvalues."""
    liouville_dim = sop.dim * sop.dim
    if count < 1 or count > liouville_dim:
        raise ValueError(f"count must be in 1…{liouville_dim}, got {count}")
    modes = []
    for q, index, values, right in _sector_eigensystems(sop, vectors=True):
        for i, value in enumerate(values):
            modes.append((abs(value.real), value.imag, q, index, value, right[:, i]))
    modes.sort(key=lambda m: (m[0], m[1]))

    result = []
    for _, _, q, index, value, column in modes[:count]:
        vector = np.zeros(liouville_dim, dtype=complex)
        vector[index] = column
        matrix = vector.reshape(sop.dim, sop.dim, order="F")
        result.append(LiouvillianMode(eigenvalue=complex(value), sector=q,
                                      matrix=matrix / np.linalg.norm(matrix)))
    return result


def _is_uniform(tau: np.ndarray) -> bool:
    if tau.size < 3:
        return False
    steps = np.diff(tau)
    return bool(steps[0] > 0 and np.allclose(steps, steps[0], rtol=1e-12, atol=0.0))


def _propagate_functional(sop: FockSuperoperator, functional: np.ndarray, seed: np.ndarray,
                          tau: np.ndarray) -> np.ndarray:
    """functional · exp(L·τ) · seed, sector by sector."""
    values = np.zeros(tau.size, dtype=complex)
    uniform = _is_uniform(tau)
    for q, index in sop.sectors.items():
        x = seed[index]
        if not np.any(x):
            continue
        w = functional[index]
        block = sop.block(q)
        if uniform:
            step = float(tau[1] - tau[0])
            key = (q, step)
            if key not in sop._step_cache:
                sop._step_cache[key] = scipy.linalg.expm(block * step)
            x = scipy.linalg.expm(block * tau[0]) @ x if tau[0] > 0 else x
            for t in range(tau.size):
                values[t] += w @ x
                x = sop._step_cache[key] @ x
        else:
            for t, delay in enumerate(tau):
                values[t] += w @ (scipy.linalg.expm(block * delay) @ x)
    return values


def _dense(operator) -> np.ndarray:
    return operator.toarray() if sparse.issparse(operator) else np.asarray(operator, dtype=complex)


def ttcf_oracle(sop: FockSuperoperator, o1, o2, o3, tau_grid: Sequence[float],
                rho: Optional[DensityMatrix] = None) -> np.ndarray:
    """
    Tr{O₂·exp(Lτ)[O₃·ρ_ss·O₁]} on the truncated space.

    Args:
        sop: the superoperator
        o1, o2, o3: operators on the truncated Hilbert space
        tau_grid: ascending nonnegative delays
        rho: stationary state; solved for when omitted

    Returns:
        Complex array over ``tau_grid``
    """
    tau = _check_tau(tau_grid)
    rho = steady_state_density(sop) if rho is None else rho
    seed = (_dense(o3) @ rho.matrix @ _dense(o1)).reshape(-1, order="F")
    functional = _dense(o2).T.reshape(-1, order="F")
    start_time = time.time()
    values = _propagate_functional(sop, functional, seed, tau)
    logger.debug("fock_ttcf_evaluated", points=int(tau.size), duration_ms=int((time.time() - start_time) * 1000))
    return values


def mode_operator(sop: FockSuperoperator, mode: Union[int, str]) -> sparse.csr_matrix:
    """Annihilator for ``a1…aN`` or an index, or c = R(π/4)·a for ``c1``/``c2``."""
    if isinstance(mode, (int, np.integer)):
        if not 0 <= int(mode) < sop.n_modes:
            raise ValueError(f"mode index {mode} out of range for {sop.n_modes} modes")
        return sop.annihilators[int(mode)]
    label = str(mode).strip().lower()
    if len(label) >= 2 and label[1:].isdigit():
        index = int(label[1:]) - 1
        if label[0] == "a" and 0 <= index < sop.n_modes:
            return sop.annihilators[index]
        if label[0] == "c" and sop.n_modes == 2 and index in (0, 1):
            r = rotation(math.pi / 4)
            return (r[index, 0] * sop.annihilators[0] + r[index, 1] * sop.annihilators[1]).tocsr()
    raise ValueError(f"unknown mode {mode!r}")


def g1_oracle(sop: FockSuperoperator, mode: Union[int, str], tau_grid: Sequence[float],
              rho: Optional[DensityMatrix] = None) -> CorrelationSeries:
    """Normalized ⟨a†(0)a(τ)⟩/⟨a†a⟩ from the full Liouvillian."""
    rho = steady_state_density(sop) if rho is None else rho
    a = _dense(mode_operator(sop, mode))
    occupation = rho.expectation(a.conj().T @ a).real
    if occupation <= 0:
        raise ValueError("normalized coherence needs a nonzero occupation (n_th > 0)")
    values = ttcf_oracle(sop, a.conj().T, a, np.eye(sop.dim), tau_grid, rho)
    return CorrelationSeries(tau=_check_tau(tau_grid), values=values / occupation, mode=str(mode),
                             order=1, normalization=occupation, method="fock-oracle")


def coherence_oracle(sop: FockSuperoperator, mode: Union[int, str], k: int, tau_grid: Sequence[float],
                     rho: Optional[DensityMatrix] = None) -> CorrelationSeries:
    """
    Normalized g⁽²ᵏ⁾(τ) with O₁ = a†ᵏ, O₂ = a†ᵏaᵏ, O₃ = aᵏ, divided by ⟨a†a⟩^(2k).

    Raises:
        ValueError: k < 1, k not below the cutoff, or vacuum occupation
    """
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"order k must be a positive integer, got {k!r}")
    if k >= sop.cutoff:
        raise ValueError(f"cutoff {sop.cutoff} is too small for order 2k = {2 * k}")
    rho = steady_state_density(sop) if rho is None else rho
    a = _dense(mode_operator(sop, mode))
    a_dag = a.conj().T
    occupation = rho.expectation(a_dag @ a).real
    if occupation <= 0:
        raise ValueError("normalized coherence needs a nonzero occupation (n_th > 0)")
    a_k = np.linalg.matrix_power(a, k)
    a_dag_k = np.linalg.matrix_power(a_dag, k)
    values = ttcf_oracle(sop, a_dag_k, a_dag_k @ a_k, a_k, tau_grid, rho)
    return CorrelationSeries(tau=_check_tau(tau_grid), values=values.real / occupation ** (2 * k) + 0j,
                             mode=str(mode), order=2 * k, normalization=occupation, method="fock-oracle")
