"""
Exception hierarchy shared by the library and the command line.

Every error carries the process exit code the CLI reports for it:
0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_NUMERIC_ERROR = 4


class JIIFError(Exception):
    """Base class for all errors raised by the jiif package."""

    exit_code: int = 1


class ConfigError(JIIFError):
    """A configuration file, flag or field failed validation."""

    exit_code = EXIT_CONFIG_ERROR


class InvalidArgumentError(JIIFError, ValueError):
    """An operation received an argument outside its contract (shape, size, range)."""

    exit_code = EXIT_CONFIG_ERROR


class InvalidStateError(JIIFError, RuntimeError):
    """An operation was called on an object in the wrong mode."""

    exit_code = EXIT_CONFIG_ERROR


class DataError(JIIFError):
    """Dataset files are missing, malformed or inconsistent."""

    exit_code = EXIT_DATA_ERROR


class CheckpointError(DataError):
    """A checkpoint archive is missing or cannot be decoded."""


class NumericError(JIIFError):
    """Training produced a non-finite value."""

    exit_code = EXIT_NUMERIC_ERROR
