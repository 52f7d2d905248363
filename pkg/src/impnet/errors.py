"""Exception types shared across impnet."""


class ImpNetError(Exception):
    """Base class for all impnet errors."""


class ShapeError(ImpNetError, ValueError):
    """Incompatible tensor or layer dimensions."""


class ConfigError(ImpNetError, ValueError):
    """Malformed or inconsistent configuration."""


class DataError(ImpNetError, ValueError):
    """Unreadable or malformed input data (WAV, archives, CSVs)."""


class NonFiniteError(ImpNetError, FloatingPointError):
    """A NaN or Inf appeared where finite values are required."""
