"""
Downstream classifiers used to score feature subsets.

Two kinds are supported: a linear one-vs-rest hinge-loss SVM fit by
stochastic subgradient descent, and k-nearest-neighbour voting. The
hyperparameter is picked by stratified k-fold grid search on the training
rows only.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from sklearn.linear_model import SGDClassifier
from sklearn.metrics import accuracy_score
from sklearn.model_selection import StratifiedKFold
from sklearn.neighbors import KNeighborsClassifier
from sklearn.pipeline import Pipeline, make_pipeline
from sklearn.preprocessing import StandardScaler

from .data import Dataset
from .errors import ConfigError, DataError, DimensionMismatchError

logger = logging.getLogger(__name__)

LINEAR_SVM = "linear-svm-ovr"
KNN = "knn"
DEFAULT_GRIDS = {
    LINEAR_SVM: (0.01, 0.1, 1.0, 10.0, 100.0),
    KNN: (1, 3, 5, 7),
}
DEFAULT_EPOCHS = 200


@dataclass(frozen=True)
class ClassifierSpec:
    """
    Classifier family and the grid searched for it.

    For the SVM the grid holds L2 regularization strengths, for kNN the
    neighbour counts. None means the family default.
    """

    kind: str = LINEAR_SVM
    grid: Optional[Tuple[float, ...]] = None
    folds: int = 5
    seed: int = 0
    epochs: int = DEFAULT_EPOCHS

    def __post_init__(self):
        if self.kind not in DEFAULT_GRIDS:
            raise ConfigError(f"unknown classifier kind {self.kind!r}; expected one of {sorted(DEFAULT_GRIDS)}")
        grid = DEFAULT_GRIDS[self.kind] if self.grid is None else tuple(self.grid)
        if not grid:
            raise ConfigError("classifier grid is empty")
        if self.kind == KNN:
            grid = tuple(int(k) for k in grid)
            if any(k < 1 for k in grid):
                raise ConfigError(f"kNN grid values must be >= 1, got {grid}")
        else:
            grid = tuple(float(r) for r in grid)
            if any(not np.isfinite(r) or r <= 0 for r in grid):
                raise ConfigError(f"SVM regularization values must be > 0, got {grid}")
        object.__setattr__(self, "grid", grid)
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")


@dataclass
class Classifier:
    kind: str
    setting: float
    n_features: int
    model: Pipeline = field(repr=False)

    def predict(self, rows) -> np.ndarray:
        return predict(self, rows)


def canonical_order(X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Row permutation sorting lexicographically on the features, then the label."""
    keys = [Z] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def _build_model(kind: str, setting, spec: ClassifierSpec, n_rows: int) -> Pipeline:
    if kind == KNN:
        k = int(setting)
        if k > n_rows:
            logger.warning("k=%d exceeds %d training rows; using k=%d", k, n_rows, n_rows)
            k = n_rows
        return make_pipeline(KNeighborsClassifier(n_neighbors=k))
    return make_pipeline(
        StandardScaler(),
        SGDClassifier(loss="hinge", penalty="l2", alpha=float(setting), max_iter=spec.epochs,
                      tol=None, shuffle=True, random_state=spec.seed),
    )


def _fit(X: np.ndarray, Z: np.ndarray, setting, spec: ClassifierSpec) -> Classifier:
    if np.unique(Z).size < 2:
        raise DataError("classifier training rows cover a single class")
    order = canonical_order(X, Z)
    model = _build_model(spec.kind, setting, spec, X.shape[0])
    model.fit(X[order], Z[order])
    return Classifier(spec.kind, setting, X.shape[1], model)


def fold_indices(train: Dataset, spec: ClassifierSpec) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Stratified folds over the training rows; shrinks the fold count to the smallest class."""
    smallest = int(train.class_sizes().min())
    n_splits = max(2, min(spec.folds, smallest))
    if n_splits < spec.folds:
        logger.warning("Smallest class has %d rows; using %d folds instead of %d",
                       smallest, n_splits, spec.folds)
    splitter = StratifiedKFold(n_splits=n_splits, shuffle=True, random_state=spec.seed)
    return list(splitter.split(train.X, train.Z))


def cv_grid_search(train: Dataset, spec: ClassifierSpec) -> Tuple[float, float]:
    """
    Pick the grid value with the best mean validation accuracy.

    Ties go to the smaller value (weaker regularization, fewer neighbours),
    then to the earlier grid entry.

    Returns:
        (best_setting, mean validation accuracy of that setting)
    """
    folds = fold_indices(train, spec)
    scores = []
    for setting in spec.grid:
        fold_scores = []
        for fit_rows, val_rows in folds:
            clf = _fit(train.X[fit_rows], train.Z[fit_rows], setting, spec)
            fold_scores.append(accuracy_score(train.Z[val_rows], predict(clf, train.X[val_rows])))
        scores.append(float(np.mean(fold_scores)))
        logger.debug("%s setting=%s cv=%.4f", spec.kind, setting, scores[-1])

    best = min(range(len(spec.grid)), key=lambda i: (-scores[i], spec.grid[i], i))
    logger.info("Grid search for %s picked %s (cv accuracy %.4f over %d folds)",
                spec.kind, spec.grid[best], scores[best], len(folds))
    return spec.grid[best], scores[best]


def train_classifier(train: Dataset, setting, spec: Optional[ClassifierSpec] = None) -> Classifier:
    spec = spec or ClassifierSpec()
    return _fit(train.X, train.Z, setting, spec)


def predict(classifier: Classifier, rows) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[1] != classifier.n_features:
        raise DimensionMismatchError(f"classifier expects {classifier.n_features} features, got {rows.shape[1]}")
    return np.asarray(classifier.model.predict(rows), dtype=np.int64)
