"""
Effective non-Hermitian Hamiltonian service.

Builds H_eff = H_c − (i/2)·γ, computes eigenstructure with Jordan-block
detection at exceptional points, and runs the PT / anti-PT diagnostics,
supermode rotation and supermode Lindblad coefficients for two modes.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np

from ..core.config import CLUSTER_TOL
from ..core.model import ModelSpec, ValidatedModel, ensure_validated, supermode_model
from ..core.runtime import get_logger
from ..utils.linalg import (
    cluster_indices,
    jordan_partition,
    matrix_scale,
    nullity,
    rank_threshold,
    safe_eig,
    sort_eigenvalues,
)

logger = get_logger()

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])

# Relative residual below which a symmetry is declared.
SYMMETRY_RTOL = 1e-10


class Frame(str, Enum):
    LAB = "lab"
    ROTATING = "rotating"


@dataclass(frozen=True)
class EffectiveNhh:
    """H_eff in the lab frame or in the frame rotating at ω̄ = mean(ω)."""

    matrix: np.ndarray
    frame: Frame = Frame.LAB
    omega_bar: float = 0.0

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])


@dataclass
class EigenCluster:
    """Eigenvalues that coalesce within the clustering radius."""

    indices: List[int]
    value: complex
    algebraic: int
    geometric: int
    jordan_blocks: List[int]
    generalized_vectors: np.ndarray
    residual: float

    @property
    def is_defective(self) -> bool:
        return self.geometric < self.algebraic


@dataclass
class EigenReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    clusters: List[EigenCluster]
    condition_number: float
    scale: float

    @property
    def defective_clusters(self) -> List[EigenCluster]:
        return [c for c in self.clusters if c.is_defective]

    def cluster_of(self, index: int) -> EigenCluster:
        for cluster in self.clusters:
            if index in cluster.indices:
                return cluster
        raise IndexError(index)

    def discriminant(self) -> complex:
        """
        D of a 2×2 report, from ν₁ − ν₂ = iD.

        Branch chosen with Re D ≥ 0 (Im D ≥ 0 when D is imaginary), which
        matches sqrt(γ₁₂² − Δ²) for the bimodal family.
        """
        if len(self.eigenvalues) != 2:
            raise ValueError("discriminant is defined for 2×2 matrices")
        d = -1j * (self.eigenvalues[0] - self.eigenvalues[1])
        if d.real < 0 or (d.real == 0 and d.imag < 0):
            d = -d
        return complex(d)


@dataclass
class SymmetryReport:
    anti_pt_residual: float
    pt_residual_after_gauge: float
    gauge_rate: float
    classification: str
    norm: float = 0.0


@dataclass
class SupermodeLindblad:
    theta: float
    A1: float
    A2: float
    A12: float
    A21: float
    gamma_c1: float
    gamma_c2: float
    omega_c1: float
    omega_c2: float
    coupling_c12: float
    diagonalized: bool = field(default=False)


def build_effective_nhh(model: Union[ModelSpec, ValidatedModel], frame: Frame = Frame.LAB) -> EffectiveNhh:
    """
    Assemble H_eff = H_c − (i/2)·γ.

    In the rotating frame the mean frequency ω̄ is removed from the diagonal.
    """
    spec = ensure_validated(model).spec
    frame = Frame(frame)
    h = spec.hamiltonian
    omega_bar = 0.0
    if frame is Frame.ROTATING:
        omega_bar = float(np.mean(spec.omega))
        h = h - omega_bar * np.eye(spec.n_modes)
    matrix = h - 0.5j * spec.gamma
    return EffectiveNhh(matrix=matrix, frame=frame, omega_bar=omega_bar)


def eigendecompose(a: np.ndarray, tol: Optional[float] = None) -> EigenReport:
    """
    Eigenvalues, coalescence clusters and Jordan structure of a square matrix.

    Eigenvalues are sorted by real part, then imaginary part. Within each
    cluster the nullities of (A − μI)^k, μ the cluster mean, are read off
    singular values and turned into Jordan block sizes.

    Args:
        a: square complex matrix
        tol: relative clustering tolerance (defaults to CLUSTER_TOL)

    Returns:
        EigenReport with per-cluster multiplicities and generalized vectors

    Raises:
        ValueError: non-square input
        EigensolverError: the eigensolver did not converge
    """
    a = np.asarray(a.matrix if isinstance(a, EffectiveNhh) else a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"eigendecompose needs a square matrix, got shape {a.shape}")
    tol = CLUSTER_TOL if tol is None else tol
    dim = a.shape[0]
    scale = matrix_scale(a)

    values, vectors = safe_eig(a)
    order = sort_eigenvalues(values)
    values, vectors = values[order], vectors[:, order]
    condition_number = float(np.linalg.cond(vectors))

    clusters = []
    identity = np.eye(dim)
    for indices in cluster_indices(values, scale, tol, matrix=a):
        size = len(indices)
        mu = complex(np.mean(values[indices]))
        shifted = a - mu * identity
        power = identity.astype(complex)
        nullities = []
        for k in range(1, size + 1):
            power = power @ shifted
            nullities.append(min(size, nullity(power, rank_threshold(dim, scale, k))))
        blocks = jordan_partition(nullities, size)
        geometric = max(1, min(nullities[0], size))

        largest = max(blocks)
        chain = np.linalg.matrix_power(shifted, largest)
        _, _, vh = np.linalg.svd(chain)
        basis = vh[-size:].conj().T
        residual = float(np.linalg.norm(chain @ basis, 2))

        clusters.append(EigenCluster(
            indices=list(indices),
            value=mu,
            algebraic=size,
            geometric=min(geometric, size),
            jordan_blocks=blocks,
            generalized_vectors=basis,
            residual=residual,
        ))

    report = EigenReport(
        eigenvalues=values,
        eigenvectors=vectors,
        clusters=clusters,
        condition_number=condition_number,
        scale=scale,
    )
    if report.defective_clusters:
        logger.info("exceptional_point_detected",
                    dim=dim,
                    clusters=[(str(c.value), c.jordan_blocks) for c in report.defective_clusters],
                    condition_number=condition_number)
    return report


def bimodal_discriminant(gamma12: float, delta: float) -> complex:
    """D = sqrt(γ₁₂² − Δ²), imaginary below the exceptional point."""
    return complex(np.sqrt(complex(gamma12 ** 2 - delta ** 2)))


def bimodal_eigenvalues(gamma: float, gamma12: float, delta: float,
                        omega_bar: float = 0.0) -> Tuple[complex, complex]:
    """Closed-form ν₁,₂ = ω̄ − iγ/2 ± iD/2 of the two-mode H_eff."""
    d = bimodal_discriminant(gamma12, delta)
    centre = omega_bar - 0.5j * gamma
    return centre + 0.5j * d, centre - 0.5j * d


def bimodal_eigenvectors(gamma12: float, delta: float) -> np.ndarray:
    """Unnormalized eigenvectors (iγ₁₂, Δ ∓ iD)ᵀ as columns, same order as bimodal_eigenvalues."""
    d = bimodal_discriminant(gamma12, delta)
    return np.array([[1j * gamma12, 1j * gamma12],
                     [delta - 1j * d, delta + 1j * d]])


def hep_locus_bimodal(delta: float) -> float:
    """Incoherent coupling at which the two-mode H_eff is defective: |Δ|."""
    return abs(float(delta))


def liouvillian_eigs_from_nhh(report: EigenReport) -> np.ndarray:
    """Single-quantum Liouvillian eigenvalues λ = −iν."""
    return -1j * np.asarray(report.eigenvalues, dtype=complex)


def pt_residuals(matrix: np.ndarray, parity: np.ndarray, shift: complex = 0.0) -> Tuple[float, float]:
    """
    Residuals of PT conjugation with entrywise complex conjugation as T.

    Returns ‖P·A*·P + A‖ for A = ``matrix`` and ‖P·B*·P − B‖ for
    B = ``matrix + shift·I``, both Frobenius norms.
    """
    a = np.asarray(matrix, dtype=complex)
    b = a + shift * np.eye(a.shape[0])
    anti = float(np.linalg.norm(parity @ a.conj() @ parity + a))
    pt = float(np.linalg.norm(parity @ b.conj() @ parity - b))
    return anti, pt


def check_parity(parity: np.ndarray, dim: int) -> np.ndarray:
    parity = np.asarray(parity, dtype=float)
    if parity.shape != (dim, dim):
        raise ValueError(f"parity matrix must be {dim}×{dim}, got shape {parity.shape}")
    if not np.allclose(parity @ parity, np.eye(dim), atol=1e-12):
        raise ValueError("parity matrix must be an involution (P² = I)")
    return parity


def classify_symmetry(anti: float, pt: float, norm: float, gauged: bool = True) -> str:
    threshold = SYMMETRY_RTOL * max(norm, np.finfo(float).tiny)
    if anti < threshold:
        return "anti-PT-symmetric"
    if gauged and pt < threshold:
        return "passive-PT-symmetric"
    return "none"


def symmetry_check(h: Union[EffectiveNhh, np.ndarray], parity: Optional[np.ndarray] = None,
                   gauge_rate: Optional[float] = None) -> SymmetryReport:
    """
    Anti-PT and passive-PT diagnostics of a non-Hermitian Hamiltonian.

    The gauge removes −(i/2)·γ̄·I, γ̄ the mean diagonal decay −2·Im H_jj, so
    a passive system with balanced loss contrast becomes PT-symmetric.

    Args:
        h: the Hamiltonian (EffectiveNhh or matrix)
        parity: parity permutation; σ_x by default for two modes
        gauge_rate: γ̄/2 override; defaults to the mean diagonal decay halved

    Raises:
        ValueError: non-square matrix, missing parity for N ≠ 2, or P² ≠ I
    """
    matrix = np.asarray(h.matrix if isinstance(h, EffectiveNhh) else h, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"symmetry_check needs a square matrix, got shape {matrix.shape}")
    dim = matrix.shape[0]
    if parity is None:
        if dim != 2:
            raise ValueError("a parity matrix must be supplied for N ≠ 2")
        parity = SIGMA_X
    parity = check_parity(parity, dim)

    if gauge_rate is None:
        gauge_rate = float(np.mean(-np.diag(matrix).imag))
    anti, pt = pt_residuals(matrix, parity, shift=1j * gauge_rate)
    norm = float(np.linalg.norm(matrix))
    classification = classify_symmetry(anti, pt, norm)
    logger.debug("symmetry_checked", anti_pt_residual=anti, pt_residual=pt, classification=classification)
    return SymmetryReport(
        anti_pt_residual=anti,
        pt_residual_after_gauge=pt,
        gauge_rate=gauge_rate,
        classification=classification,
        norm=norm,
    )


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def supermode_transform(h: EffectiveNhh, theta: float = math.pi / 4) -> EffectiveNhh:
    """R(θ)·H·R(θ)ᵀ for two modes; a similarity, so eigenvalues are unchanged."""
    if h.dim != 2:
        raise ValueError(f"supermode_transform needs a 2×2 Hamiltonian, got {h.dim}×{h.dim}")
    r = rotation(theta)
    return EffectiveNhh(matrix=r @ h.matrix @ r.T, frame=h.frame, omega_bar=h.omega_bar)


def supermode_lindblad_coefficients(model: Union[ModelSpec, ValidatedModel],
                                    theta: float = math.pi / 4) -> SupermodeLindblad:
    """Decay and cross-dissipation coefficients of the rotated modes."""
    spec = ensure_validated(model).spec
    if spec.n_modes != 2:
        raise ValueError(f"supermode coefficients need two modes, got {spec.n_modes}")
    if np.any(np.abs(spec.gamma.imag) > 0):
        logger.warning("supermode_coefficients_real_part_only",
                       max_imag=float(np.abs(spec.gamma.imag).max()))
    g = spec.gamma.real
    g11, g22, g12, g21 = g[0, 0], g[1, 1], g[0, 1], g[1, 0]
    g12_bar = 0.5 * (g12 + g21)
    g_minus = 0.5 * (g11 - g22)
    c2, s2 = math.cos(theta) ** 2, math.sin(theta) ** 2
    sin2 = math.sin(2 * theta)

    a1 = g11 * c2 + g22 * s2 - g12_bar * sin2
    a2 = g11 * s2 + g22 * c2 + g12_bar * sin2
    a12 = g_minus * sin2 + g12 * c2 - g21 * s2
    a21 = g_minus * sin2 + g21 * c2 - g12 * s2

    rotated = supermode_model(spec, theta)
    mean_rate = 0.5 * (g11 + g22)
    diagonalized = abs(a12) < 1e-12 and abs(a21) < 1e-12
    return SupermodeLindblad(
        theta=theta,
        A1=float(a1),
        A2=float(a2),
        A12=float(a12),
        A21=float(a21),
        gamma_c1=float(mean_rate - g12_bar),
        gamma_c2=float(mean_rate + g12_bar),
        omega_c1=float(rotated.omega[0]),
        omega_c2=float(rotated.omega[1]),
        coupling_c12=float(rotated.chi[0, 1].real),
        diagonalized=diagonalized,
    )


def resolve_mode(model: Union[ModelSpec, ValidatedModel], mode: Union[int, str]) -> Tuple[ValidatedModel, int, str]:
    """
    Map a mode index or label onto (model, index, label).

    Labels ``a1…aN`` address bare modes; ``c1``/``c2`` address the π/4
    supermodes of a two-mode model, which rotates the model first.
    """
    validated = ensure_validated(model)
    n = validated.n_modes
    if isinstance(mode, (int, np.integer)):
        index = int(mode)
        if not 0 <= index < n:
            raise ValueError(f"mode index {index} out of range for {n} modes")
        return validated, index, f"a{index + 1}"
    label = str(mode).strip().lower()
    if len(label) >= 2 and label[0] in "ac" and label[1:].isdigit():
        index = int(label[1:]) - 1
        if label[0] == "c":
            if n != 2 or index not in (0, 1):
                raise ValueError(f"supermode {label!r} needs a two-mode model")
            return ensure_validated(supermode_model(validated)), index, label
        if 0 <= index < n:
            return validated, index, label
    raise ValueError(f"unknown mode {mode!r}; use a1…a{n} or c1/c2")
