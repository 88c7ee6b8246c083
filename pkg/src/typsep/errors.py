"""Exception types shared across the package."""


class CapacityError(RuntimeError):
    """A sector is too large to materialize under the configured limit."""


class CountOverflowError(OverflowError):
    """A dimension count does not fit in a signed 64-bit integer."""


class EmptySectorError(ValueError):
    """An operation needs a sector with at least one configuration."""


class DimensionMismatchError(ValueError):
    """An observable or state does not match the space it is used with."""
