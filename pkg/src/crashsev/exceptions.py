"""Exception hierarchy. Each family maps to one CLI exit code."""


class CrashsevError(Exception):
    exit_code = 1


class ConfigError(CrashsevError, ValueError):
    """Invalid schema, run configuration or hyperparameters."""

    exit_code = 2


class DataError(CrashsevError, ValueError):
    """Input data that does not satisfy the schema or an operation's preconditions."""

    exit_code = 3


class ModelingError(CrashsevError, RuntimeError):
    """A fit that failed numerically (singular system, solver cap reached...)."""

    exit_code = 4


class ConvergenceError(ModelingError):
    pass
