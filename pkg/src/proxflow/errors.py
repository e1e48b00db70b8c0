"""Exception types raised by proxflow."""


class ProxflowError(Exception):
    """Base class for all proxflow errors."""


class ArgumentError(ProxflowError, ValueError):
    """Invalid argument: out-of-range parameter, bad dimensions, empty grid."""


class EvaluationError(ProxflowError, ArithmeticError):
    """A function, gradient or prox evaluation produced a non-finite result.

    The offending state (if any) is kept on ``state``.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ConvergenceError(ProxflowError):
    """Fixed-point iteration did not contract within the iteration budget."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class InsufficientDataError(ProxflowError):
    """Too few usable samples for a fit."""
