"""Exception hierarchy."""


class RelayCapError(Exception):
    """Base class for all package errors."""


class DomainError(RelayCapError, ValueError):
    """An argument is outside the domain of the operation."""


class ConvergenceError(RelayCapError):
    """An iterative method hit its iteration cap.

    The best iterate found so far is attached as ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NumericalError(RelayCapError, ArithmeticError):
    """A factorization or Newton step broke down."""
