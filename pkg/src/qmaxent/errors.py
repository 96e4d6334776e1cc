"""Exception types shared across the toolkit."""


class TomographyError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(TomographyError, ValueError):
    """An input fails a structural precondition (matrix, record, config...)."""


class ParseError(ValidationError):
    """Circuit or config text could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DomainError(ValidationError):
    """Numerical-domain violation (negative eigenvalue, vanishing population)."""


class IncompleteDataError(ValidationError):
    """Pauli means are missing for strings required by a decomposition."""


class InfeasibleRecordError(TomographyError):
    """The measured record admits no normalizable maximal-entropy state."""
