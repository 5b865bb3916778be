"""Eddy-current signal classification toolkit."""

from .errors import ConfigError, ConsistencyError, DataError, EddyClassError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConsistencyError",
    "DataError",
    "EddyClassError",
    "__version__",
]
