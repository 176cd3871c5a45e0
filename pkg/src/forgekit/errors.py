"""Exception taxonomy shared across the toolkit.

The CLI maps these onto exit codes: configuration/usage errors exit 1,
data errors exit 2, numeric failures exit 3.
"""


class ForgekitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ForgekitError):
    """Invalid configuration: bad shapes, unknown keys, inconsistent specs."""


class UsageError(ForgekitError):
    """API misuse: wrong call order, mismatched arguments."""


class DataError(ForgekitError):
    """Bad input data: unreadable files, out-of-range labels."""


class NumericError(ForgekitError):
    """Non-finite values where finite ones are required."""


class GenerationSkip(ForgekitError):
    """A single synthesis item cannot be produced; callers log and move on."""
