"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class EddyClassError(Exception):
    exit_code = 1


class ConfigError(EddyClassError, ValueError):
    """Invalid configuration or arguments."""

    exit_code = 1


class DataError(EddyClassError, ValueError):
    """Malformed, missing or numerically invalid input data."""

    exit_code = 2


class ConsistencyError(EddyClassError):
    """Self-contradictory training data or a failed learner consistency check."""

    exit_code = 3
