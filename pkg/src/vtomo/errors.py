"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class VtomoError(Exception):
    """Base class; ``kind`` is the machine-readable tag the CLI reports."""

    kind = "error"
    exit_code = 1


class ConfigError(VtomoError, ValueError):
    kind = "config"
    exit_code = 1


class FieldIOError(VtomoError, OSError):
    kind = "io"
    exit_code = 2


class BadMagicError(FieldIOError):
    kind = "bad-magic"


class HeaderError(FieldIOError):
    kind = "header"


class PayloadLengthError(FieldIOError):
    kind = "payload-length"


class KindMismatchError(FieldIOError):
    kind = "kind-mismatch"


class NaNPayloadError(FieldIOError):
    kind = "nan-payload"


class NumericalFailure(VtomoError, ArithmeticError):
    """NaN encountered or an iterative solver failed to converge."""

    kind = "numerical"
    exit_code = 3

    def __init__(self, message, *, line_index=None, residual=None):
        super().__init__(message)
        self.line_index = line_index
        self.residual = residual
