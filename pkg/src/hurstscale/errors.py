"""Exception hierarchy shared by every module."""


class HurstScaleError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HurstScaleError, ValueError):
    """Invalid parameter combination (unsupported order, scale range too large...)."""


class InputError(HurstScaleError, ValueError):
    """Array shapes or lengths that an operation cannot accept."""


class DomainError(HurstScaleError, ValueError):
    """A scalar argument outside its mathematical domain."""


class DegenerateInputError(HurstScaleError, ValueError):
    """The signal carries no information at some scale (e.g. a constant or a line)."""


class NumericError(HurstScaleError, ArithmeticError):
    """A linear-algebra step failed (singular system, bad eigenspace, negative embedding)."""


class FitError(HurstScaleError, RuntimeError):
    """Variogram fit did not converge.

    ``diagnostics`` carries whatever the optimizer reported.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DataError(HurstScaleError, ValueError):
    """Malformed input file. ``row`` is the 1-based data row, when known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row
