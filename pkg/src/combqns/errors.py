"""Exception types shared across the package."""


class QNSError(Exception):
    """Base class for all package errors."""


class InvalidInput(QNSError, ValueError):
    """Raised when arguments violate an operation's preconditions."""


class NumericalFailure(QNSError, ArithmeticError):
    """Raised when an integration or time step fails its convergence check."""


class ExtractionFailure(QNSError, ArithmeticError):
    """Raised when measured combinations cannot be inverted to cumulant coefficients."""


class SolverFailure(QNSError, ArithmeticError):
    """Raised when the spectral linear system is numerically singular."""
