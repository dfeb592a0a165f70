"""Exception types shared across the package."""


class GTVMinError(Exception):
    """Base class for solver and analysis failures."""


class SingularSystemError(GTVMinError):
    """Raised when the direct solver's linear system is singular or
    numerically indefinite."""


class DivergenceError(GTVMinError):
    """Raised when an iterative solve produces a non-finite objective."""
