class GateselError(Exception):
    """Base class for every error raised by gatesel."""
    pass


class DataError(GateselError, ValueError):
    """Malformed input data or a violated dataset invariant."""
    pass


class ConfigError(GateselError, ValueError):
    """Invalid configuration value."""
    pass


class DimensionMismatchError(GateselError, ValueError):
    """Widths of a model and its inputs disagree."""
    pass


class TrainingDivergenceError(GateselError, ArithmeticError):
    """Raised when the training loss stops being finite."""

    def __init__(self, iteration, breakdown):
        self.iteration = iteration
        self.breakdown = breakdown
        super().__init__(
            f"non-finite loss at iteration {iteration}: "
            f"class={breakdown.e_class!r} struct={breakdown.e_struct!r} "
            f"select={breakdown.e_select!r} q={breakdown.e_q!r} total={breakdown.e_total!r}"
        )
