"""Exception types shared across the toolkit.

The CLI maps these onto process exit codes: usage errors exit 1, data and
format errors exit 2, numerical failures exit 3.
"""


class FloraclassError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(FloraclassError):
    """Tensor or parameter shapes are incompatible with an operation."""


class DataError(FloraclassError):
    """Malformed or inconsistent dataset, label, or species-store input."""


class NotFoundError(DataError):
    """A requested record does not exist."""


class FormatError(DataError):
    """A serialized model file is corrupt, truncated, or unsupported."""


class NumericalError(FloraclassError):
    """Training or optimization produced non-finite values."""


class UsageError(FloraclassError):
    """Invalid command-line arguments."""
