"""Exception types shared across the package."""


class AnalysisError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(AnalysisError, ValueError):
    """Raised when an input violates a documented precondition."""


class InsufficientDataError(InvalidInputError):
    """Raised when an operation receives fewer points than it can fit."""


class SchemaError(InvalidInputError):
    """Raised when a file does not match its declared schema.

    Carries the path and, when known, the 1-based line number of the
    offending row so CLI error messages can name it.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}: "
        if line is not None:
            prefix += f"line {line}: "
        super().__init__(prefix + message)


class ConfigError(AnalysisError, ValueError):
    """Raised when a configuration file is missing required entries."""
