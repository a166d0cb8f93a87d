"""Exception types shared across the package.

The CLI maps these onto exit codes: usage/config/input problems exit 1,
file-format problems exit 2, numeric failures exit 3.
"""


class InputError(ValueError):
    """A value passed to an operation violates its contract."""


class ShapeError(InputError):
    """Array dimensions are inconsistent with the operation."""


class ConfigError(InputError):
    """A configuration object is incomplete or self-contradictory."""


class FormatError(RuntimeError):
    """A file does not match its declared binary/JSON format."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""
