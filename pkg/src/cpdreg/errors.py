"""Exception hierarchy shared by all cpdreg modules."""


class CPDRegError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(CPDRegError, ValueError):
    """An argument violates an operation's precondition."""


class PointFileError(CPDRegError):
    """A point file could not be read or parsed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ParseError(PointFileError):
    """A token in a point file is not a real number."""


class DimensionError(PointFileError):
    """Rows of a point file disagree on their column count."""


class EmptyInputError(PointFileError):
    """A point file holds no points."""


class WriteError(CPDRegError, OSError):
    """Writing an artifact to disk failed."""


class NumericError(CPDRegError, ArithmeticError):
    """A linear-algebra routine failed or produced an invalid value."""

    def __init__(self, message, **diagnostics):
        self.diagnostics = diagnostics
        if diagnostics:
            extra = ", ".join(f"{k}={v}" for k, v in diagnostics.items())
            message = f"{message} ({extra})"
        super().__init__(message)
