"""Filter-method feature rankings: Fisher score and histogram mutual information."""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.metrics import mutual_info_score

from .data import Dataset
from .errors import ConfigError, DataError

logger = logging.getLogger(__name__)

DEFAULT_MI_BINS = 10
# stands in for an infinite Fisher score so rankings stay finite
FISHER_SENTINEL = float(np.finfo(np.float64).max)


@dataclass(frozen=True)
class FeatureRanking:
    scores: np.ndarray
    order: np.ndarray  # descending score, ties to the lower index
    method: str = ""

    @classmethod
    def from_scores(cls, scores, method: str = "") -> "FeatureRanking":
        scores = np.asarray(scores, dtype=np.float64)
        order = np.lexsort((np.arange(scores.shape[0]), -scores))
        return cls(scores, order, method)

    def top(self, n_select: int) -> np.ndarray:
        if not 1 <= n_select <= self.order.shape[0]:
            raise ConfigError(f"cannot take the top {n_select} of {self.order.shape[0]} features")
        return self.order[:n_select]


def fisher_score_rank(data: Dataset) -> FeatureRanking:
    """
    Rank features by sum_c n_c (mu_c - mu)^2 / sum_c n_c sigma_c^2.

    Constant features score 0. A feature with zero within-class spread
    but distinct class means gets FISHER_SENTINEL.
    """
    if data.class_count < 2:
        raise DataError(f"Fisher score needs at least two classes, got {data.class_count}")
    X = data.X
    mu = X.mean(axis=0)
    between = np.zeros(data.n_features)
    within = np.zeros(data.n_features)
    for c in range(data.class_count):
        rows = X[data.Z == c]
        between += rows.shape[0] * np.square(rows.mean(axis=0) - mu)
        within += rows.shape[0] * rows.var(axis=0)

    scores = np.zeros(data.n_features)
    spread = within > 0
    scores[spread] = between[spread] / within[spread]
    unbounded = ~spread & (between > 0)
    if np.any(unbounded):
        logger.warning("Features %s separate the classes with zero within-class variance; "
                       "scoring them with the sentinel", np.flatnonzero(unbounded).tolist())
        scores[unbounded] = FISHER_SENTINEL
    return FeatureRanking.from_scores(scores, "fisher")


def equal_width_codes(column: np.ndarray, bins: int) -> np.ndarray:
    lo, hi = float(column.min()), float(column.max())
    if hi == lo:
        return np.zeros(column.shape[0], dtype=np.int64)
    return np.clip(((column - lo) / (hi - lo) * bins).astype(np.int64), 0, bins - 1)


def mutual_info_rank(data: Dataset, bins: int = DEFAULT_MI_BINS) -> FeatureRanking:
    """Rank features by I(feature; class) in nats after equal-width binning."""
    if bins < 2:
        raise ConfigError(f"bins must be >= 2, got {bins}")
    scores = np.array([mutual_info_score(data.Z, equal_width_codes(data.X[:, j], bins))
                       for j in range(data.n_features)])
    # plugin estimates can come out as -0.0 or -1e-17
    scores = np.maximum(scores, 0.0)
    return FeatureRanking.from_scores(scores, "mutual_info")
