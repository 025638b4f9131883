"""Package-wide exception types."""
from __future__ import annotations


class GibbsleafError(Exception):
    """Base class for errors raised by gibbsleaf."""


class SchemaError(GibbsleafError, ValueError):
    """A configuration or serialized object violates its schema.

    ``code`` is a stable machine-readable identifier, one per failure kind.
    """

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class NotMixingError(GibbsleafError, ValueError):
    """The transition matrix is not primitive (no power is entrywise positive)."""


class IterationError(GibbsleafError, RuntimeError):
    """An iterative solver failed to converge within its iteration cap."""
