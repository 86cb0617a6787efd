"""Exception types shared across the package."""


class GridcastError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(GridcastError):
    """Invalid input: bad argument, violated precondition, or mismatched shapes.

    The CLI maps this to exit code 1.
    """


class DataFormatError(ValidationError):
    """A dataset, graph, checkpoint, or embedding file does not match its format."""


class ConfigError(ValidationError):
    """A run-configuration file has missing, unknown, or out-of-range keys."""


class NumericError(GridcastError):
    """A computation produced non-finite values (reported with its location)."""
