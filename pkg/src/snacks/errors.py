"""Exception hierarchy shared across the package."""


class SnacksError(Exception):
    """Base class for all package errors."""


class ParseError(SnacksError, ValueError):
    """Malformed LIBSVM text."""

    def __init__(self, line_no, message):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class DataError(SnacksError, ValueError):
    """Dataset content is inconsistent with what an operation requires."""


class NumericalError(SnacksError, ArithmeticError):
    """A linear-algebra step failed or produced a degenerate result."""


class DegenerateMatrixError(NumericalError):
    """Every eigenvalue fell below the retention threshold."""


class ModelFormatError(SnacksError):
    """Model byte stream cannot be decoded."""


class ModelVersionError(ModelFormatError):
    pass


class ModelChecksumError(ModelFormatError):
    pass


class ModelTruncatedError(ModelFormatError):
    pass
