"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class SingularSystemError(InvalidInputError):
    """Raised when a linear system has no usable solution at the requested ridge."""


class NumericalFailure(RuntimeError):
    """Raised when a computation produces non-finite values it cannot recover from."""
