"""
Dense linear-algebra helpers shared by the analysis services.

Singular-value nullities, eigenvalue clustering, Jordan partitions from
nullity sequences, and a propagator that switches between spectral and
scaling-and-squaring evaluation of exp(G·t).
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..core.config import CLUSTER_TOL, EXPM_COND_LIMIT, RANK_SAFETY
from ..core.errors import EigensolverError
from ..core.runtime import get_logger

logger = get_logger()

_ROUNDING_FACTOR = 4.0


def matrix_scale(a: np.ndarray) -> float:
    """max(1, ‖A‖₂), the reference magnitude for relative thresholds."""
    if a.size == 0:
        return 1.0
    return max(1.0, float(np.linalg.norm(a, 2)))


def rank_threshold(dim: int, scale: float, power: int = 1) -> float:
    """Singular-value cutoff dim·eps·‖A‖^k·RANK_SAFETY."""
    return dim * np.finfo(float).eps * RANK_SAFETY * scale ** power


def nullity(a: np.ndarray, threshold: float) -> int:
    """Number of singular values of ``a`` at or below ``threshold``."""
    sv = scipy.linalg.svdvals(a)
    return int(np.sum(sv <= threshold))


def sort_eigenvalues(values: np.ndarray) -> np.ndarray:
    """Indices ordering eigenvalues by real part, then imaginary part."""
    return np.lexsort((values.imag, values.real))


def cluster_radius(scale: float, tol: float = None) -> float:
    """Distance within which eigenvalues count as coincident: tol·scale."""
    tol = CLUSTER_TOL if tol is None else tol
    return tol * scale


def rounding_radius(size: int, scale: float) -> float:
    """
    Largest spread rounding error can give an exact ``size``-fold defective eigenvalue.

    A Jordan block of order m perturbed by O(eps)·‖A‖ splits by
    O((m·eps)^(1/m))·‖A‖.
    """
    size = max(size, 2)
    return _ROUNDING_FACTOR * (size * np.finfo(float).eps) ** (1.0 / size) * scale


def _is_defective_cluster(a: np.ndarray, values: np.ndarray, scale: float) -> bool:
    """True when the eigenvalues ``values`` of ``a`` are one defective eigenvalue split by rounding."""
    dim = a.shape[0]
    size = len(values)
    shifted = a - complex(np.mean(values)) * np.eye(dim)
    if nullity(shifted, rank_threshold(dim, scale)) < 1:
        return False
    return nullity(np.linalg.matrix_power(shifted, size), rank_threshold(dim, scale, size)) >= size


def _merge_within(values: np.ndarray, distance: np.ndarray, radius: float) -> List[List[int]]:
    groups = [[i] for i in range(len(values))]
    while len(groups) > 1:
        best = None
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                merged = groups[a] + groups[b]
                spread = distance[np.ix_(merged, merged)].max()
                if spread < radius and (best is None or spread < best[0]):
                    best = (spread, a, b)
        if best is None:
            break
        _, a, b = best
        groups[a] = sorted(groups[a] + groups[b])
        del groups[b]
    return groups


def _merge_defective(a: np.ndarray, values: np.ndarray, distance: np.ndarray, groups: List[List[int]],
                     scale: float, tol: float) -> List[List[int]]:
    # Tightening tol below its default shrinks the rounding allowance with it.
    shrink = min(1.0, tol / CLUSTER_TOL)
    merged = []
    remaining = list(groups)
    while remaining:
        seed = remaining.pop(0)
        centre = np.mean(values[seed])
        neighbours = sorted(remaining, key=lambda g: abs(np.mean(values[g]) - centre))
        candidates = []
        members = list(seed)
        for group in neighbours:
            members = members + group
            spread = distance[np.ix_(members, members)].max()
            candidates.append((list(members), spread))
        absorbed = 0
        for k in range(len(candidates), 0, -1):
            members, spread = candidates[k - 1]
            if spread >= rounding_radius(len(members), scale) * shrink:
                continue
            if _is_defective_cluster(a, values[members], scale):
                absorbed = k
                break
        if absorbed:
            seed = sorted(candidates[absorbed - 1][0])
            for group in neighbours[:absorbed]:
                remaining.remove(group)
        merged.append(seed)
    return merged


def cluster_indices(values: np.ndarray, scale: float, tol: float = None,
                    matrix: Optional[np.ndarray] = None) -> List[List[int]]:
    """
    Partition eigenvalue indices into coalescence clusters.

    Values closer than ``cluster_radius`` are merged greedily, tightest
    first. When ``matrix`` is given, groups whose joint spread stays within
    ``rounding_radius`` are merged as well, but only if the nullities of
    (A − μI) and (A − μI)^size show a single defective eigenvalue; close
    but diagonalizable pairs stay apart.

    Args:
        values: eigenvalues (any order)
        scale: reference magnitude, usually ``matrix_scale(A)``
        tol: relative clustering tolerance (defaults to CLUSTER_TOL)
        matrix: the matrix the eigenvalues belong to

    Returns:
        Lists of indices, ordered by the smallest member index
    """
    tol = CLUSTER_TOL if tol is None else tol
    values = np.asarray(values, dtype=complex)
    distance = np.abs(values[:, None] - values[None, :])
    groups = _merge_within(values, distance, cluster_radius(scale, tol))
    if matrix is not None and len(groups) > 1:
        groups = _merge_defective(np.asarray(matrix, dtype=complex), values, distance,
                                  sorted(groups, key=lambda g: g[0]), scale, tol)
    return sorted(groups, key=lambda g: g[0])


def jordan_partition(nullities: Sequence[int], size: int) -> List[int]:
    """
    Jordan block sizes of one eigenvalue from the nullities of (A − λI)^k.

    The Weyr characteristic w_k = n_k − n_{k−1} is forced non-increasing
    and to sum to the cluster size; the block sizes are its conjugate
    partition, largest first.
    """
    weyr = []
    previous_nullity = 0
    previous_w = size
    remaining = size
    for n_k in nullities:
        if remaining == 0:
            break
        w_k = min(previous_w, max(0, n_k - previous_nullity), remaining)
        if w_k == 0:
            w_k = 1
        weyr.append(w_k)
        remaining -= w_k
        previous_w = w_k
        previous_nullity = max(previous_nullity + w_k, n_k)
    while remaining > 0:
        weyr.append(1)
        remaining -= 1

    blocks = [sum(1 for w in weyr if w >= i) for i in range(1, weyr[0] + 1)]
    return sorted(blocks, reverse=True)


def safe_eig(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """scipy.linalg.eig with convergence failures turned into EigensolverError."""
    try:
        return scipy.linalg.eig(a)
    except (np.linalg.LinAlgError, ValueError) as e:
        norm = float(np.linalg.norm(a)) if np.all(np.isfinite(a)) else float("nan")
        logger.error("eigensolve_failed",
                     error=str(e),
                     error_type=type(e).__name__,
                     matrix_norm=norm)
        raise EigensolverError(
            "eigenvalue solver did not converge",
            {"matrix_norm": norm, "shape": list(a.shape), "reason": str(e)},
        ) from e


class Propagator:
    """
    Evaluates exp(G·t)·v for a fixed generator G.

    Uses the eigendecomposition when the eigenvector matrix is well
    conditioned, otherwise the dense scaling-and-squaring exponential.
    """

    def __init__(self, generator: np.ndarray, cond_limit: float = None, force_expm: bool = False):
        self.generator = np.asarray(generator, dtype=complex)
        limit = EXPM_COND_LIMIT if cond_limit is None else cond_limit
        values, vectors = safe_eig(self.generator)
        self.condition_number = float(np.linalg.cond(vectors))
        scale = matrix_scale(self.generator)
        gaps = np.abs(values[:, None] - values[None, :]) + np.eye(len(values)) * np.inf
        resolution = max(cluster_radius(scale, 10 * CLUSTER_TOL), rounding_radius(2, scale))
        self.near_degenerate = bool(len(values) > 1 and gaps.min() < resolution)
        self.method = "eigen"
        if (force_expm or self.near_degenerate
                or not np.isfinite(self.condition_number) or self.condition_number > limit):
            self.method = "expm"
        if self.method == "eigen":
            self._values = values
            self._vectors = vectors
            self._inverse = np.linalg.inv(vectors)
        logger.debug("propagator_method_selected",
                     method=self.method,
                     condition_number=self.condition_number)

    def apply(self, vector: np.ndarray, times: Sequence[float]) -> np.ndarray:
        """Rows are exp(G·t)·vector for each t in ``times``."""
        vector = np.asarray(vector, dtype=complex)
        times = np.asarray(times, dtype=float)
        if self.method == "eigen":
            coefficients = self._inverse @ vector
            phases = np.exp(np.outer(times, self._values))
            return (phases * coefficients[None, :]) @ self._vectors.T
        return np.array([scipy.linalg.expm(self.generator * t) @ vector for t in times])
