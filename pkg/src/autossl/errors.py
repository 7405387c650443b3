"""Exception types shared across the package."""


class AutosslError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AutosslError, ValueError):
    """Invalid configuration value. The message names the offending field."""


class IngestionError(AutosslError, ValueError):
    """A required input file is missing or unreadable."""


class MalformedInputError(AutosslError, ValueError):
    """An input file has a bad record. Carries the 1-based line number."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"{message} (line {line_number})"
        super().__init__(message)
        self.line_number = line_number


class DimensionError(AutosslError, ValueError):
    """Array shapes disagree with what an operation requires."""


class NumericError(AutosslError, FloatingPointError):
    """A non-finite value appeared where only finite values are valid."""


class PreparationError(AutosslError, RuntimeError):
    """A pretext task could not build its targets on the given graph."""
