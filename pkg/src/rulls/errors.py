"""Exception hierarchy shared by all modules.

The CLI maps each class onto an exit status, so library code raises the
most specific class that applies.
"""


class RullsError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ConfigError(RullsError, ValueError):
    """A parameter is outside its allowed range or inconsistent with the data."""

    exit_code = 1


class DataError(RullsError, ValueError):
    """Input data is unreadable or malformed."""

    exit_code = 2


class DegeneracyError(RullsError, ArithmeticError):
    """A numerical step has no well-defined result (zero variance, zero mean distance)."""

    exit_code = 3
