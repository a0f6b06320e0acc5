"""Exception types shared across the pipeline, mapped to CLI exit codes."""


class StrokedetError(Exception):
    """Base class; carries the CLI exit code."""

    exit_code = 1


class ConfigError(StrokedetError):
    """Invalid configuration: unknown keys, bad values, unknown architecture."""

    exit_code = 2


class DataError(StrokedetError):
    """Unusable input data: empty runs, malformed files, impossible splits."""

    exit_code = 3


class NumericError(StrokedetError):
    """Numeric failure: non-finite values during model evaluation or training."""

    exit_code = 4
