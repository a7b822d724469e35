__all__ = (
    "SsnsmError",
    "ValidationError",
    "DomainError",
    "ConvergenceError",
    "IngestionError",
)


class SsnsmError(Exception):
    """
    Base class for every error raised by ssnsm_aft.
    """


class ValidationError(SsnsmError, ValueError):
    """
    Raised by clean() when an object violates one of its invariants.
    """


class DomainError(SsnsmError, ValueError):
    """
    Raised when a numeric argument is non-finite or outside the domain of the function.
    """


class ConvergenceError(SsnsmError, RuntimeError):
    """
    Raised when an optimizer is asked to fail loudly and cannot make progress.
    """


class IngestionError(SsnsmError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
