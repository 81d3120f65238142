"""Shared exception types."""


class ConfigError(ValueError):
    """A scenario configuration is malformed or violates an invariant."""


class InsufficientDataError(ValueError):
    """An estimator was asked to run on data that cannot support it."""


class StreamOrderError(ValueError):
    """A timestamp stream was not sorted in non-decreasing time order."""


class UnfittableDataError(ValueError):
    """Fringe samples are degenerate and do not constrain the fit."""


class NonConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap before converging.

    Carries the last iterate so callers can inspect the partial result.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
