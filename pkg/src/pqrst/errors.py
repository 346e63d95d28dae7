"""Exception types raised across the package."""


class PqrstError(Exception):
    """Base class for all package errors."""


class ParameterError(PqrstError, ValueError):
    """An argument is outside the range an operation accepts."""


class FormatError(PqrstError, ValueError):
    """A record or config file does not follow its documented format."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(PqrstError, ValueError):
    """An annotation set violates its ordering or spacing invariants."""


class FitError(PqrstError, ArithmeticError):
    """The constrained least-squares wavelet fit is degenerate."""
