"""Exception types shared across the package.

The CLI maps ConfigError to exit code 1 and DataError to exit code 2.
"""


class PhenotrajError(Exception):
    """Base class for all package errors."""


class ConfigError(PhenotrajError):
    """Invalid configuration value or combination."""


class DataError(PhenotrajError):
    """Input data violates a documented contract."""


class ParseError(DataError):
    """Malformed content in an input file; message names the line."""


class SchemaError(DataError):
    """Input file header does not match the documented schema."""


class ShapeError(PhenotrajError):
    """Tensor operands have incompatible shapes."""


class NumericalError(PhenotrajError):
    """A numeric routine produced or detected non-finite/singular values."""
