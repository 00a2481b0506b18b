"""
Gated multi-layer perceptron.

Feature j enters the network as a_j * x_j with a_j = exp(-lambda_j^2).
Hidden layers use the logistic sigmoid, the output layer a softmax.
Gradients are derived by hand; the finite-difference oracle in the test
suite keeps them honest.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, softmax

from .errors import DimensionMismatchError

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-12


def gate_activation(lam):
    """a = exp(-lambda^2); even in lambda, 1 at 0, tends to 0 for large |lambda|."""
    return np.exp(-np.square(lam))


def gate_derivative(lam):
    """da/dlambda = -2 lambda exp(-lambda^2)."""
    return -2.0 * lam * gate_activation(lam)


def apply_gates(x, lambdas):
    """Scale each feature (last axis) by its gate value."""
    x = np.asarray(x, dtype=np.float64)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if x.shape[-1] != lambdas.shape[0]:
        raise DimensionMismatchError(f"{x.shape[-1]} features but {lambdas.shape[0]} gates")
    return x * gate_activation(lambdas)


@dataclass
class Layer:
    weights: np.ndarray  # fan_in x fan_out
    bias: np.ndarray  # fan_out

    def copy(self) -> "Layer":
        return Layer(self.weights.copy(), self.bias.copy())


@dataclass
class GatedNetwork:
    """Gate parameters followed by a fully connected sigmoid/softmax stack."""

    lambdas: np.ndarray
    layers: List[Layer]
    seed: Optional[int] = None

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=np.float64)
        if not self.layers:
            raise DimensionMismatchError("network needs at least one layer")
        fan_in = self.lambdas.shape[0]
        for i, layer in enumerate(self.layers):
            if layer.weights.shape[0] != fan_in or layer.bias.shape != (layer.weights.shape[1],):
                raise DimensionMismatchError(
                    f"layer {i} has weights {layer.weights.shape} and bias {layer.bias.shape}, "
                    f"expected fan-in {fan_in}"
                )
            fan_in = layer.weights.shape[1]

    @classmethod
    def initialize(cls, layer_sizes: Sequence[int], seed: Optional[int] = None) -> "GatedNetwork":
        """Glorot-uniform weights, zero biases and open gates (lambda = 0)."""
        if len(layer_sizes) < 2 or any(int(s) < 1 for s in layer_sizes):
            raise DimensionMismatchError(f"invalid layer sizes {list(layer_sizes)}")
        rng = np.random.default_rng(seed)
        layers = []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            layers.append(Layer(rng.uniform(-limit, limit, size=(fan_in, fan_out)), np.zeros(fan_out)))
        return cls(np.zeros(layer_sizes[0]), layers, seed)

    @property
    def layer_sizes(self) -> List[int]:
        return [self.lambdas.shape[0]] + [layer.weights.shape[1] for layer in self.layers]

    @property
    def n_features(self) -> int:
        return self.lambdas.shape[0]

    @property
    def n_classes(self) -> int:
        return self.layers[-1].weights.shape[1]

    def gate_values(self) -> np.ndarray:
        return gate_activation(self.lambdas)

    def copy(self) -> "GatedNetwork":
        return GatedNetwork(self.lambdas.copy(), [layer.copy() for layer in self.layers], self.seed)

    def parameters(self) -> List[np.ndarray]:
        """[lambda, W1, b1, W2, b2, ...]"""
        arrays = [self.lambdas]
        for layer in self.layers:
            arrays.extend([layer.weights, layer.bias])
        return arrays

    def with_parameters(self, arrays: Sequence[np.ndarray]) -> "GatedNetwork":
        if len(arrays) != 1 + 2 * len(self.layers):
            raise DimensionMismatchError(f"expected {1 + 2 * len(self.layers)} arrays, got {len(arrays)}")
        layers = [Layer(np.array(arrays[1 + 2 * i], dtype=np.float64), np.array(arrays[2 + 2 * i], dtype=np.float64))
                  for i in range(len(self.layers))]
        return GatedNetwork(np.array(arrays[0], dtype=np.float64), layers, self.seed)

    def to_dict(self) -> dict:
        return {
            "layer_sizes": self.layer_sizes,
            "lambdas": self.lambdas.tolist(),
            "weights": [layer.weights.tolist() for layer in self.layers],
            "biases": [layer.bias.tolist() for layer in self.layers],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GatedNetwork":
        layers = [Layer(np.asarray(w, dtype=np.float64).reshape(a, b), np.asarray(bias, dtype=np.float64))
                  for w, bias, a, b in zip(payload["weights"], payload["biases"],
                                           payload["layer_sizes"][:-1], payload["layer_sizes"][1:])]
        net = cls(np.asarray(payload["lambdas"], dtype=np.float64), layers, payload.get("seed"))
        if net.layer_sizes != list(payload["layer_sizes"]):
            raise DimensionMismatchError(f"checkpoint sizes {payload['layer_sizes']} != {net.layer_sizes}")
        return net


@dataclass
class ForwardCache:
    inputs: np.ndarray
    activations: List[np.ndarray] = field(default_factory=list)  # gated input, then each hidden layer
    probabilities: Optional[np.ndarray] = None


@dataclass
class Gradients:
    d_lambdas: np.ndarray
    d_layers: List[Layer]

    def arrays(self) -> List[np.ndarray]:
        arrays = [self.d_lambdas]
        for layer in self.d_layers:
            arrays.extend([layer.weights, layer.bias])
        return arrays

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(np.square(a)) for a in self.arrays())))


def forward(net: GatedNetwork, x) -> Tuple[np.ndarray, ForwardCache]:
    """
    Class probabilities for one P-vector or an n x P matrix.

    Returns the probabilities (same rank as ``x``) and the cache needed by
    ``backward``.
    """
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != net.n_features:
        raise DimensionMismatchError(f"input has {X.shape[1]} features, network expects {net.n_features}")

    h = apply_gates(X, net.lambdas)
    cache = ForwardCache(inputs=X, activations=[h])
    for layer in net.layers[:-1]:
        h = expit(h @ layer.weights + layer.bias)
        cache.activations.append(h)
    out = net.layers[-1]
    probs = softmax(h @ out.weights + out.bias, axis=1)
    cache.probabilities = probs
    return (probs[0] if single else probs), cache


def predict(net: GatedNetwork, X) -> np.ndarray:
    probs, _ = forward(net, np.atleast_2d(X))
    return np.argmax(probs, axis=1)


def backward(net: GatedNetwork, X, targets_onehot, loss_config, struct_subset=None,
             update_gates: bool = True, cache: Optional[ForwardCache] = None) -> Gradients:
    """
    Exact gradient of the composite loss with respect to every parameter.

    The class term reaches lambda through the gated input; E_select and E_Q
    depend on lambda directly; E_struct depends on lambda only (through the
    gated copy of the rows in ``struct_subset``) and never on the weights.

    Args:
        net: network to differentiate.
        X: n x P batch.
        targets_onehot: n x C one-hot targets.
        loss_config: LossConfig with alpha1, alpha2, beta and Q.
        struct_subset: row indices for E_struct; None means all rows.
        update_gates: False zeroes the lambda gradient (pretraining).
        cache: forward cache for X, if already computed.
    """
    # losses imports this module
    from . import losses

    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    T = np.atleast_2d(np.asarray(targets_onehot, dtype=np.float64))
    if cache is None:
        _, cache = forward(net, X)
    n = X.shape[0]

    # softmax + cross-entropy
    delta = (cache.probabilities - T) / n
    d_layers: List[Layer] = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        h_prev = cache.activations[i]
        d_layers[i] = Layer(h_prev.T @ delta, delta.sum(axis=0))
        grad_in = delta @ net.layers[i].weights.T
        if i > 0:
            delta = grad_in * h_prev * (1.0 - h_prev)

    d_lambdas = np.zeros_like(net.lambdas)
    if update_gates:
        a = net.gate_values()
        d_a = np.sum(grad_in * X, axis=0)
        if loss_config.alpha1:
            d_a += loss_config.alpha1 * losses.select_regularizer_grad(a)
        if loss_config.alpha2:
            d_a += loss_config.alpha2 * losses.count_regularizer_grad(a, loss_config.n_select)
        if loss_config.beta:
            rows = X if struct_subset is None else X[np.asarray(struct_subset, dtype=np.int64)]
            if rows.shape[0] >= 2:
                d_a += loss_config.beta * losses.struct_loss_grad(rows, a, loss_config.ordered_pairs)
        d_lambdas = d_a * gate_derivative(net.lambdas)
    return Gradients(d_lambdas, d_layers)
