"""
Loss terms of the gated selector and their composition

    E_tot = E_class + beta * E_struct + alpha1 * E_select + alpha2 * E_Q

plus the derivatives of the gate-dependent terms with respect to the gate
values a_j, which ``gated_mlp.backward`` chains through da/dlambda.
"""

import logging
from dataclasses import asdict, dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import ConfigError
from .gated_mlp import LOG_FLOOR, ForwardCache, GatedNetwork, apply_gates, forward, gate_activation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossConfig:
    """
    Multipliers and targets of the composite loss.

    subset_size is |S_t|, the number of rows drawn per iteration for
    E_struct; 0 means the full batch.
    """

    alpha1: float = 1.0
    alpha2: float = 1.0
    beta: float = 0.0
    n_select: int = 1
    subset_size: int = 0
    ordered_pairs: bool = False

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "beta"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be a finite value >= 0, got {value}")
        if self.n_select < 1:
            raise ConfigError(f"target feature count must be >= 1, got {self.n_select}")
        if self.subset_size == 1 or self.subset_size < 0:
            raise ConfigError(f"subset_size must be 0 (full batch) or >= 2, got {self.subset_size}")

    def with_beta(self, beta: float) -> "LossConfig":
        return replace(self, beta=beta)

    def with_target(self, n_select: int) -> "LossConfig":
        return replace(self, n_select=n_select)


@dataclass(frozen=True)
class LossBreakdown:
    e_class: float
    e_select: float
    e_q: float
    e_struct: float
    e_total: float

    @classmethod
    def compose(cls, config: LossConfig, e_class: float, e_select: float, e_q: float,
                e_struct: float) -> "LossBreakdown":
        total = e_class + config.beta * e_struct + config.alpha1 * e_select + config.alpha2 * e_q
        return cls(float(e_class), float(e_select), float(e_q), float(e_struct), float(total))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite([self.e_class, self.e_select, self.e_q, self.e_struct, self.e_total])))

    def to_dict(self) -> dict:
        return asdict(self)


def _as_rows(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return X.reshape(-1, 1) if X.ndim == 1 else X


def cross_entropy(probabilities, targets_onehot) -> float:
    """Mean negative log-probability of the true class (log clamped at 1e-12)."""
    P = np.atleast_2d(np.asarray(probabilities, dtype=np.float64))
    T = np.atleast_2d(np.asarray(targets_onehot, dtype=np.float64))
    return float(-np.mean(np.sum(T * np.log(np.maximum(P, LOG_FLOOR)), axis=1)))


def select_regularizer(lambdas) -> float:
    """(1/P) sum a_j (1 - a_j); zero when every gate is fully open or closed."""
    a = gate_activation(np.asarray(lambdas, dtype=np.float64))
    return float(np.mean(a * (1.0 - a)))


def select_regularizer_grad(a: np.ndarray) -> np.ndarray:
    return (1.0 - 2.0 * a) / a.shape[0]


def count_regularizer(lambdas, n_select: int) -> float:
    """(sum a_j - Q)^2 / Q^2."""
    if n_select < 1:
        raise ConfigError(f"target feature count must be >= 1, got {n_select}")
    a = gate_activation(np.asarray(lambdas, dtype=np.float64))
    return float((a.sum() - n_select) ** 2 / n_select ** 2)


def count_regularizer_grad(a: np.ndarray, n_select: int) -> np.ndarray:
    return np.full_like(a, 2.0 * (a.sum() - n_select) / n_select ** 2)


def _stress(d_orig: np.ndarray, d_red: np.ndarray, ordered_pairs: bool):
    keep = d_orig > 0
    skipped = int(d_orig.size - np.count_nonzero(keep))
    denom = d_orig.sum() * (2.0 if ordered_pairs else 1.0)
    if denom == 0:
        return 0.0, skipped
    diff = d_orig[keep] - d_red[keep]
    return float(np.sum(diff * diff / d_orig[keep]) / denom), skipped


def sammon_stress(X, Xhat, ordered_pairs: bool = False, warn: bool = True) -> float:
    """
    Sammon stress between the Euclidean geometry of X and of Xhat.

    Rows of X and Xhat correspond; the two may have different widths.
    Pairs of identical rows in X are skipped.
    """
    X, Xhat = _as_rows(X), _as_rows(Xhat)
    if X.shape[0] != Xhat.shape[0]:
        raise ConfigError(f"{X.shape[0]} original rows but {Xhat.shape[0]} mapped rows")
    if X.shape[0] < 2:
        raise ConfigError("Sammon stress needs at least two rows")
    stress, skipped = _stress(pdist(X), pdist(Xhat), ordered_pairs)
    if skipped and warn:
        logger.warning("Sammon stress skipped %d zero-distance pair(s)", skipped)
    return stress


def struct_loss(X, lambdas, subset: Optional[Sequence[int]] = None, ordered_pairs: bool = False) -> float:
    """Sammon stress of the rows in ``subset`` (all rows if None) against their gated copy."""
    X = _as_rows(X)
    rows = X if subset is None else X[np.asarray(subset, dtype=np.int64)]
    if rows.shape[0] < 2:
        raise ConfigError("E_struct needs a subset of at least two rows")
    return sammon_stress(rows, apply_gates(rows, lambdas), ordered_pairs, warn=False)


def struct_loss_grad(rows: np.ndarray, a: np.ndarray, ordered_pairs: bool = False) -> np.ndarray:
    """
    dE_struct/da for the given rows.

    With c_il = -2 (d_il - dh_il) / (d_il * dh_il * D) the gradient is
    a_j * sum_{i<l} c_il (x_ij - x_lj)^2, evaluated through the symmetric
    matrix of c without materialising the pairwise differences.
    """
    d_orig = pdist(rows)
    d_red = pdist(rows * a)
    denom = d_orig.sum() * (2.0 if ordered_pairs else 1.0)
    if denom == 0:
        return np.zeros_like(a)
    valid = (d_orig > 0) & (d_red > 0)
    coef = np.zeros_like(d_orig)
    coef[valid] = -2.0 * (d_orig[valid] - d_red[valid]) / (d_orig[valid] * d_red[valid] * denom)
    C = squareform(coef)
    weighted = C.sum(axis=1) @ np.square(rows) - np.sum(rows * (C @ rows), axis=0)
    return a * weighted


def total_loss(net: GatedNetwork, X, targets_onehot, config: LossConfig,
               subset: Optional[Sequence[int]] = None,
               cache: Optional[ForwardCache] = None) -> LossBreakdown:
    """
    Every loss term for one batch.

    ``subset`` selects the rows used by E_struct; None means every row of
    the batch, an empty subset gives E_struct = 0.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if cache is None:
        _, cache = forward(net, X)
    e_class = cross_entropy(cache.probabilities, targets_onehot)
    a = net.gate_values()
    e_select = select_regularizer(net.lambdas)
    e_q = count_regularizer(net.lambdas, config.n_select)

    rows = X if subset is None else X[np.asarray(subset, dtype=np.int64)]
    e_struct = 0.0
    if rows.shape[0] >= 2:
        e_struct, _ = _stress(pdist(rows), pdist(rows * a), config.ordered_pairs)
    return LossBreakdown.compose(config, e_class, e_select, e_q, e_struct)
