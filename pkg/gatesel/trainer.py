"""
End-to-end training of the gated selector.

pretrain (plain MLP, gates open) -> init_gates (lambda ~ N(2, 1/sqrt(P)),
gates almost closed) -> joint Adagrad on weights and gates -> pick the Q
features with the smallest |lambda|.
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .data import Dataset
from .errors import ConfigError, DataError, TrainingDivergenceError
from .gated_mlp import GatedNetwork, backward, forward
from .losses import LossBreakdown, LossConfig, cross_entropy, total_loss
from .optimizer import (
    DEFAULT_EPSILON,
    DEFAULT_INITIAL_ACCUMULATOR,
    DEFAULT_LEARNING_RATE,
    AdagradState,
    adagrad_step,
)
from .parallel import run_parallel

logger = logging.getLogger(__name__)

GATE_INIT_MEAN = 2.0


@dataclass(frozen=True)
class PretrainSpec:
    """Stop when the relative loss improvement over ``window`` iterations drops below tolerance."""

    max_iters: int = 3000
    loss_tolerance: float = 1e-5
    window: int = 50
    learning_rate: float = DEFAULT_LEARNING_RATE

    def __post_init__(self):
        if self.max_iters < 0:
            raise ConfigError(f"pretrain max_iters must be >= 0, got {self.max_iters}")
        if self.window < 1:
            raise ConfigError(f"pretrain window must be >= 1, got {self.window}")


@dataclass(frozen=True)
class TrainSpec:
    hidden_sizes: Tuple[int, ...] = (8,)
    loss_config: LossConfig = field(default_factory=LossConfig)
    iterations: int = 20000
    restarts: int = 5
    seed: int = 0
    pretrain: PretrainSpec = field(default_factory=PretrainSpec)
    learning_rate: float = DEFAULT_LEARNING_RATE
    initial_accumulator: float = DEFAULT_INITIAL_ACCUMULATOR
    epsilon: float = DEFAULT_EPSILON
    progress: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if any(h < 1 for h in self.hidden_sizes):
            raise ConfigError(f"hidden layer sizes must be >= 1, got {self.hidden_sizes}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.restarts < 1:
            raise ConfigError(f"restarts must be >= 1, got {self.restarts}")

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["hidden_sizes"] = list(self.hidden_sizes)
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainSpec":
        payload = dict(payload)
        payload["loss_config"] = LossConfig(**payload.get("loss_config", {}))
        payload["pretrain"] = PretrainSpec(**payload.get("pretrain", {}))
        return cls(**payload)


TABULAR_PRESET = TrainSpec(
    hidden_sizes=(8,),
    loss_config=LossConfig(alpha1=1.0, alpha2=1.0),
    iterations=20000,
)

HSI_PRESET = TrainSpec(
    hidden_sizes=(500, 350, 150),
    loss_config=LossConfig(alpha1=5.0, alpha2=1.0, subset_size=100),
    iterations=50000,
)


@dataclass
class TrainedSelector:
    network: GatedNetwork
    loss_trace: List[LossBreakdown]
    spec: TrainSpec

    def gate_values(self) -> np.ndarray:
        return self.network.gate_values()

    def selected(self, n_select: Optional[int] = None) -> np.ndarray:
        return select_features(self, n_select or self.spec.loss_config.n_select)


def derive_restart_seeds(master_seed: int, runs: int) -> List[int]:
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(master_seed).spawn(runs)]


def _check_trainable(spec: TrainSpec, data: Dataset):
    if data.class_count < 2:
        raise DataError(f"training needs at least two classes, got {data.class_count}")
    if spec.loss_config.n_select > data.n_features:
        raise ConfigError(f"cannot select {spec.loss_config.n_select} of {data.n_features} features")
    if spec.loss_config.subset_size > data.n_rows:
        raise ConfigError(f"subset size {spec.loss_config.subset_size} exceeds {data.n_rows} rows")


def pretrain(spec: TrainSpec, data: Dataset) -> GatedNetwork:
    """
    Fit the plain MLP (all gates open) on cross-entropy.

    Returns the best network seen. With a zero iteration budget the random
    initialization comes back unchanged.
    """
    layer_sizes = [data.n_features, *spec.hidden_sizes, data.class_count]
    net = GatedNetwork.initialize(layer_sizes, seed=spec.seed)
    budget = spec.pretrain
    if budget.max_iters == 0:
        return net

    X, T = data.X, data.onehot()
    open_gates = LossConfig(alpha1=0.0, alpha2=0.0, beta=0.0)
    state = AdagradState.initialize(net.parameters()[1:], budget.learning_rate,
                                    spec.initial_accumulator, spec.epsilon)
    history: List[float] = []
    best_net, best_loss = net, np.inf
    converged = False
    for _ in range(budget.max_iters):
        probs, cache = forward(net, X)
        loss = cross_entropy(probs, T)
        history.append(loss)
        if loss < best_loss:
            best_net, best_loss = net, loss
        if len(history) > budget.window:
            past = history[-budget.window - 1]
            if (past - loss) / max(abs(past), 1e-12) < budget.loss_tolerance:
                converged = True
                break
        grads = backward(net, X, T, open_gates, update_gates=False, cache=cache)
        weights, state = adagrad_step(net.parameters()[1:], grads.arrays()[1:], state)
        net = net.with_parameters([net.lambdas, *weights])

    if converged:
        logger.debug("Pretraining converged after %d iterations, loss %.6g", len(history), best_loss)
    else:
        logger.warning("Pretraining did not converge in %d iterations; using best loss %.6g",
                       budget.max_iters, best_loss)
    return best_net


def init_gates(net: GatedNetwork, n_features: int, seed: Optional[int] = None) -> GatedNetwork:
    """Draw lambda_j ~ N(2, 1/sqrt(P)) so every gate starts almost closed."""
    if n_features != net.n_features:
        raise ConfigError(f"network has {net.n_features} gates, asked for {n_features}")
    rng = np.random.default_rng(seed)
    gated = net.copy()
    gated.lambdas = rng.normal(GATE_INIT_MEAN, 1.0 / np.sqrt(n_features), size=n_features)
    return gated


def _draw_subset(rng: np.random.Generator, n_rows: int, size: int) -> Optional[np.ndarray]:
    if size == 0:
        return None
    return np.sort(rng.choice(n_rows, size=size, replace=False))


def train(spec: TrainSpec, data: Dataset) -> TrainedSelector:
    """
    Pretrain, initialize gates and minimize the composite loss.

    A fresh subset S_t is drawn every iteration, whatever beta is, so runs
    that differ only in beta consume identical random streams.
    """
    _check_trainable(spec, data)
    config = spec.loss_config
    gate_seq, subset_seq = np.random.SeedSequence(spec.seed).spawn(2)

    net = pretrain(spec, data)
    net = init_gates(net, data.n_features, seed=int(gate_seq.generate_state(1)[0]))
    subset_rng = np.random.default_rng(subset_seq)

    X, T = data.X, data.onehot()
    state = AdagradState.initialize(net.parameters(), spec.learning_rate,
                                    spec.initial_accumulator, spec.epsilon)
    trace: List[LossBreakdown] = []
    for t in tqdm(range(spec.iterations), disable=not spec.progress, desc="gates", leave=False):
        subset = _draw_subset(subset_rng, data.n_rows, config.subset_size)
        _, cache = forward(net, X)
        breakdown = total_loss(net, X, T, config, subset, cache=cache)
        if not breakdown.is_finite():
            raise TrainingDivergenceError(t, breakdown)
        trace.append(breakdown)
        grads = backward(net, X, T, config, subset, cache=cache)
        params, state = adagrad_step(net.parameters(), grads.arrays(), state)
        net = net.with_parameters(params)

    final = trace[-1]
    logger.info("Trained seed=%d beta=%g Q=%d: class=%.4g struct=%.4g sum(a)=%.3f",
                spec.seed, config.beta, config.n_select, final.e_class, final.e_struct,
                float(net.gate_values().sum()))
    return TrainedSelector(net, trace, spec)


def select_features(selector: TrainedSelector, n_select: int) -> np.ndarray:
    """Indices of the n_select smallest |lambda| (largest gates), ties to the lower index."""
    lambdas = selector.network.lambdas
    if not 1 <= n_select <= lambdas.shape[0]:
        raise ConfigError(f"cannot select {n_select} of {lambdas.shape[0]} features")
    order = np.lexsort((np.arange(lambdas.shape[0]), np.abs(lambdas)))
    return order[:n_select]


def multi_restart(spec: TrainSpec, data: Dataset, runs: Optional[int] = None,
                  workers: int = 1) -> List[TrainedSelector]:
    """Independent runs whose seeds are derived from ``spec.seed``."""
    runs = spec.restarts if runs is None else runs
    if runs < 1:
        raise ConfigError(f"runs must be >= 1, got {runs}")
    specs: Sequence[TrainSpec] = [replace(spec, seed=s) for s in derive_restart_seeds(spec.seed, runs)]
    return run_parallel(lambda s: train(s, data), specs, workers)
