"""Exception hierarchy shared across the package."""


class AttrE2vecError(Exception):
    """Base class for all package errors."""


class ValidationError(AttrE2vecError, ValueError):
    """Input data failed a structural check (shapes, ids, duplicates)."""


class ConfigError(AttrE2vecError, ValueError):
    """A configuration value is missing or out of range."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class NumericFault(AttrE2vecError, ArithmeticError):
    """A tensor picked up NaN/Inf or an undefined quantity (e.g. cosine of a zero vector)."""


class SkipEdge(AttrE2vecError):
    """Raised by samplers when an edge has no usable positive/negative pool."""


class DatasetIOError(AttrE2vecError, OSError):
    """Reading or writing a file failed; the message names the path."""
