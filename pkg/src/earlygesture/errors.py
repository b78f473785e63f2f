"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so new failure modes should
subclass one of the three categories below rather than raising bare
exceptions.
"""


class GestureError(Exception):
    """Base class for all package errors."""


class ConfigError(GestureError):
    """Invalid configuration value or malformed config file."""


class DataError(GestureError):
    """Problem with corpus data, annotations, or serialized artifacts."""


class ShapeError(DataError):
    """Tensor shape incompatible with an operation or a model."""


class CheckpointError(DataError):
    """Unreadable, truncated, or inconsistent checkpoint file."""


class NumericError(GestureError):
    """Numerical failure (non-finite loss, degenerate statistics)."""
