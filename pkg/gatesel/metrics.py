"""
Scores used to compare a feature subset with the full feature space:
Sammon stress, partition agreement (NMI, ARI, pair-counting Jaccard) and
overall classification accuracy.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import (
    accuracy_score,
    adjusted_rand_score,
    normalized_mutual_info_score,
)
from sklearn.metrics.cluster import pair_confusion_matrix

from .clustering import fcm, harden
from .errors import ConfigError, DimensionMismatchError
from .losses import sammon_stress

logger = logging.getLogger(__name__)


@dataclass
class MetricsReport:
    ss: float
    nmi: float
    ari: float
    ji: float
    oca: float = float("nan")
    subset: Tuple[int, ...] = field(default_factory=tuple)
    split: str = "test"

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["subset"] = [int(i) for i in self.subset]
        return payload

    @classmethod
    def mean(cls, reports: Sequence["MetricsReport"]) -> "MetricsReport":
        """Average of every score; the subset survives only if all reports share it."""
        if not reports:
            raise ConfigError("cannot average an empty list of reports")
        subsets = {tuple(r.subset) for r in reports}
        splits = {r.split for r in reports}
        values = {name: float(np.mean([getattr(r, name) for r in reports]))
                  for name in ("ss", "nmi", "ari", "ji", "oca")}
        return cls(subset=subsets.pop() if len(subsets) == 1 else (),
                   split=splits.pop() if len(splits) == 1 else "mixed", **values)


def _check_labels(a, b) -> Tuple[np.ndarray, np.ndarray]:
    a, b = np.asarray(a).ravel(), np.asarray(b).ravel()
    if a.shape != b.shape:
        raise DimensionMismatchError(f"label vectors of length {a.shape[0]} and {b.shape[0]}")
    if a.shape[0] == 0:
        raise DimensionMismatchError("label vectors are empty")
    return a, b


def nmi(a, b) -> float:
    """
    Normalized mutual information, geometric normalization.

    When either side is a single cluster the entropy vanishes; the score is
    then 1 if both sides are single clusters and 0 otherwise.
    """
    a, b = _check_labels(a, b)
    single_a, single_b = np.unique(a).size == 1, np.unique(b).size == 1
    if single_a or single_b:
        return 1.0 if single_a and single_b else 0.0
    return float(normalized_mutual_info_score(a, b, average_method="geometric"))


def ari(a, b) -> float:
    a, b = _check_labels(a, b)
    return float(adjusted_rand_score(a, b))


def jaccard(a, b) -> float:
    """
    Pair-counting Jaccard: pairs together in both / pairs together in either.

    Two all-singleton partitions (no pair together anywhere) score 1.
    """
    a, b = _check_labels(a, b)
    if a.shape[0] < 2:
        return 1.0
    C = pair_confusion_matrix(a, b)
    together = C[1, 1] + C[0, 1] + C[1, 0]
    if together == 0:
        return 1.0
    return float(C[1, 1] / together)


def oca(predicted, truth) -> float:
    predicted, truth = _check_labels(predicted, truth)
    return float(accuracy_score(truth, predicted))


def stress_of_subset(X_full, subset) -> float:
    """Sammon stress of the full data against its projection on the ``subset`` columns."""
    X_full = np.atleast_2d(np.asarray(X_full, dtype=np.float64))
    subset = np.asarray(subset, dtype=np.int64).ravel()
    if subset.size == 0:
        raise ConfigError("feature subset is empty")
    if np.unique(subset).size != subset.size:
        raise ConfigError(f"feature subset has duplicates: {subset.tolist()}")
    if subset.min() < 0 or subset.max() >= X_full.shape[1]:
        raise ConfigError(f"feature subset {subset.tolist()} out of range for {X_full.shape[1]} features")
    return sammon_stress(X_full, X_full[:, subset])


def cluster_agreement(X_full, X_reduced, n_clusters: int, fcm_params: Optional[Mapping] = None,
                      seed: Optional[int] = None) -> Tuple[float, float, float]:
    """Cluster both spaces with the same FCM settings and return (nmi, ari, ji)."""
    params = dict(fcm_params or {})
    full = harden(fcm(X_full, n_clusters, seed=seed, **params))
    reduced = harden(fcm(X_reduced, n_clusters, seed=seed, **params))
    return nmi(full, reduced), ari(full, reduced), jaccard(full, reduced)
