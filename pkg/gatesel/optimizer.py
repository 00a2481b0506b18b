import logging
from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DimensionMismatchError

logger = logging.getLogger(__name__)

DEFAULT_LEARNING_RATE = 0.05
DEFAULT_INITIAL_ACCUMULATOR = 0.1
DEFAULT_EPSILON = 1e-8


@dataclass(frozen=True)
class AdagradState:
    """Running sums of squared gradients, one array per parameter."""

    accumulators: Tuple[np.ndarray, ...]
    learning_rate: float = DEFAULT_LEARNING_RATE
    epsilon: float = DEFAULT_EPSILON
    steps: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")

    @classmethod
    def initialize(cls, params: Sequence[np.ndarray], learning_rate: float = DEFAULT_LEARNING_RATE,
                   initial_accumulator: float = DEFAULT_INITIAL_ACCUMULATOR,
                   epsilon: float = DEFAULT_EPSILON) -> "AdagradState":
        if initial_accumulator < 0:
            raise ConfigError(f"initial_accumulator must be >= 0, got {initial_accumulator}")
        accumulators = tuple(np.full(np.shape(p), float(initial_accumulator)) for p in params)
        return cls(accumulators, learning_rate, epsilon)


def adagrad_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
                 state: AdagradState) -> Tuple[List[np.ndarray], AdagradState]:
    """
    One Adagrad update.

        acc' = acc + g^2
        p'   = p - lr * g / (sqrt(acc') + eps)

    Inputs are not modified; new arrays and a new state are returned.
    """
    if not (len(params) == len(grads) == len(state.accumulators)):
        raise DimensionMismatchError(
            f"{len(params)} parameters, {len(grads)} gradients, {len(state.accumulators)} accumulators"
        )
    new_params, new_acc = [], []
    for p, g, acc in zip(params, grads, state.accumulators):
        if np.shape(p) != np.shape(g) or np.shape(p) != acc.shape:
            raise DimensionMismatchError(f"shape mismatch {np.shape(p)} / {np.shape(g)} / {acc.shape}")
        acc = acc + np.square(g)
        new_acc.append(acc)
        new_params.append(p - state.learning_rate * g / (np.sqrt(acc) + state.epsilon))
    return new_params, replace(state, accumulators=tuple(new_acc), steps=state.steps + 1)
