"""Exception types raised across the package."""


class InputError(ValueError):
    """Malformed input: wrong dimensions, invalid parameter values."""


class ConfigurationError(ValueError):
    """Stepsizes, schedules or problem data violate a convergence precondition."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class EstimationError(RuntimeError):
    """An iterative estimate did not converge; carries the best value found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class OracleError(RuntimeError):
    """A reference solution could not be certified."""


class IterationError(RuntimeError):
    """A solver could not take another step (e.g. exhausted schedule)."""


class VerificationError(RuntimeError):
    """A runtime convergence check failed in strict mode."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class InsufficientDataError(ValueError):
    """Too few usable samples to fit a rate."""
