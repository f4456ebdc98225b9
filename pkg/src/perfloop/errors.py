"""Exception hierarchy shared by all perfloop modules."""

from __future__ import annotations


class PerfloopError(Exception):
    """Base class for all errors raised by perfloop."""


class ParseError(PerfloopError):
    """Raised when wire-format input cannot be decoded into domain records."""


class ValidationError(PerfloopError):
    """Raised when a model violates a structural invariant."""


class TargetNotFoundError(PerfloopError):
    """Raised when an operation refers to an element that does not exist."""
