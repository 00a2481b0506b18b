"""Fuzzy C-means by alternating optimization."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError, DimensionMismatchError

logger = logging.getLogger(__name__)

DEFAULT_FUZZINESS = 2.0
DEFAULT_TOLERANCE = 1e-6
DEFAULT_MAX_ITER = 300


@dataclass
class FuzzyPartition:
    U: np.ndarray  # n x C memberships
    centers: np.ndarray  # C x d
    objective_trace: List[float] = field(default_factory=list)
    m: float = DEFAULT_FUZZINESS
    n_iter: int = 0
    converged: bool = False

    @property
    def n_clusters(self) -> int:
        return self.centers.shape[0]


def _memberships(X: np.ndarray, centers: np.ndarray, m: float) -> np.ndarray:
    d2 = cdist(X, centers, metric="sqeuclidean")
    U = np.zeros_like(d2)
    singular = np.any(d2 == 0.0, axis=1)
    if np.any(singular):
        # a point sitting on a center belongs to it alone
        U[np.flatnonzero(singular), np.argmax(d2[singular] == 0.0, axis=1)] = 1.0
    regular = ~singular
    if np.any(regular):
        ratios = d2[regular] / d2[regular].min(axis=1, keepdims=True)
        inv = ratios ** (-1.0 / (m - 1.0))
        U[regular] = inv / inv.sum(axis=1, keepdims=True)
    return U


def _centers(X: np.ndarray, U: np.ndarray, m: float) -> np.ndarray:
    W = U ** m
    return (W.T @ X) / W.sum(axis=0)[:, None]


def _objective(X: np.ndarray, U: np.ndarray, centers: np.ndarray, m: float) -> float:
    return float(np.sum((U ** m) * cdist(X, centers, metric="sqeuclidean")))


def _initial_centers(X: np.ndarray, n_clusters: int, seed: Optional[int]) -> np.ndarray:
    rng = np.random.default_rng(seed)
    distinct = np.unique(X, axis=0)
    pool = distinct if distinct.shape[0] >= n_clusters else X
    return pool[rng.choice(pool.shape[0], size=n_clusters, replace=False)].copy()


def fcm(X, n_clusters: int, m: float = DEFAULT_FUZZINESS, tol: float = DEFAULT_TOLERANCE,
        max_iter: int = DEFAULT_MAX_ITER, seed: Optional[int] = None,
        init_centers=None) -> FuzzyPartition:
    """
    Partition the rows of X into n_clusters fuzzy clusters.

    Args:
        X: n x d data.
        n_clusters: number of clusters C, 1 <= C <= n.
        m: fuzzifier, > 1.
        tol: stop once no center moves farther than this.
        max_iter: iteration cap.
        seed: picks C distinct rows as initial centers.
        init_centers: explicit C x d initial centers; overrides seed.

    Returns:
        FuzzyPartition whose objective_trace holds J_m after each iteration.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n = X.shape[0]
    if m <= 1:
        raise ConfigError(f"fuzzifier m must be > 1, got {m}")
    if not 1 <= n_clusters <= n:
        raise ConfigError(f"cannot form {n_clusters} clusters from {n} rows")
    if max_iter < 1:
        raise ConfigError(f"max_iter must be >= 1, got {max_iter}")

    if init_centers is None:
        centers = _initial_centers(X, n_clusters, seed)
    else:
        centers = np.array(init_centers, dtype=np.float64)
        if centers.shape != (n_clusters, X.shape[1]):
            raise DimensionMismatchError(f"initial centers {centers.shape}, expected {(n_clusters, X.shape[1])}")

    trace: List[float] = []
    U = None
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        U = _memberships(X, centers, m)
        new_centers = _centers(X, U, m)
        trace.append(_objective(X, U, new_centers, m))
        shift = float(np.max(np.abs(new_centers - centers)))
        centers = new_centers
        if shift < tol:
            converged = True
            break

    if not converged:
        logger.debug("FCM stopped at max_iter=%d without reaching tol=%g", max_iter, tol)
    return FuzzyPartition(U, centers, trace, m, iteration, converged)


def harden(partition: FuzzyPartition) -> np.ndarray:
    """Per-row argmax of the memberships; ties go to the lowest cluster index."""
    return np.argmax(partition.U, axis=1)
