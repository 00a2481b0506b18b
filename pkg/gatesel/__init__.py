"""
gatesel: embedded feature selection with a gated multi-layer perceptron.

Gates a_j = exp(-lambda_j^2) in front of an MLP are trained jointly with the
network on cross-entropy, gate regularizers and an optional Sammon-stress
term that keeps the geometry of the data in the selected subspace.
"""

__version__ = "0.3.0"

from .errors import (  # noqa: F401
    ConfigError,
    DataError,
    DimensionMismatchError,
    GateselError,
    TrainingDivergenceError,
)
