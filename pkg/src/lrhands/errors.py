"""Exception types shared across the package."""


class LRHandsError(Exception):
    """Base class for all package errors."""


class DataError(LRHandsError):
    """Invalid or inconsistent input data (bad dimensions, degenerate sets, ...)."""


class FormatError(DataError):
    """Unreadable or unsupported on-disk format (bad magic, unknown version)."""


class StaleStateError(LRHandsError):
    """Temporal state too old to resolve an occlusion split (sampling gap too large)."""
