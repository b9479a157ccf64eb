"""Shared exception types."""


class NodelensError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(NodelensError):
    pass
