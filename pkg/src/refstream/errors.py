"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A detector or manifest parameter violates its contract."""


class DataError(ValueError):
    """An input file or stream violates the data contract."""


class DegenerateGroupError(RuntimeError):
    """The reference group is too small for the requested computation."""
