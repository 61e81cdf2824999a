"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError and its
subclasses -> 2, ConvergenceError -> 3.
"""


class TagriskError(Exception):
    """Base class for all package errors."""


class ConfigError(TagriskError):
    """Bad or missing configuration (paths, keys, parameter values)."""


class DataError(TagriskError):
    """Invalid, inconsistent or insufficient input data."""


class ValidationError(DataError):
    """A domain invariant was violated at construction time."""


class ParseError(DataError):
    """Malformed file or payload; message names the offending location."""


class TransportError(DataError):
    """HTTP failure that persisted after retries."""


class NotFoundError(DataError):
    """The remote API does not know the requested entity."""


class ConvergenceError(TagriskError):
    """An iterative numeric procedure failed to converge."""
