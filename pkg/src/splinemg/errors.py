"""Exception types shared across the package."""


class SplinemgError(Exception):
    """Base class for all package errors."""


class ParameterError(SplinemgError, ValueError):
    """Invalid construction parameter (degree, level, bounds, config)."""


class ShapeError(SplinemgError, ValueError):
    """Vector or matrix dimensions do not match the operator."""


class DomainError(SplinemgError, ValueError):
    """Evaluation or data points fall outside the spline domain."""


class CapacityError(SplinemgError, RuntimeError):
    """A dense object would exceed the configured dense cap."""


class NumericError(SplinemgError, RuntimeError):
    """Non-finite values or a failed factorization during computation."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
