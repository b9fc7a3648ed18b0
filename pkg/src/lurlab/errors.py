"""Exception hierarchy shared across lurlab."""


class LurLabError(Exception):
    """Base class for every error raised by lurlab."""


class ShapeError(LurLabError, ValueError):
    """Incompatible shapes or parameter layouts."""


class DomainError(LurLabError, ValueError):
    """An argument lies outside the domain of an operation."""


class DegenerateDirectionError(DomainError):
    """A direction vector is too short to normalise."""


class InsufficientDataError(DomainError):
    """Too few usable points survive for a fit."""


class DiagnosticError(LurLabError):
    """A diagnostic could not be computed (e.g. every entry undefined)."""


class ParseError(LurLabError, ValueError):
    """Malformed input file. ``line`` is 1-based and counts the header."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(LurLabError, ArithmeticError):
    """A non-finite value appeared during optimisation.

    ``step`` is the outer step index at which it happened and ``trace`` holds
    whatever was recorded before the failure.
    """

    def __init__(self, message, step=None, trace=None):
        self.step = step
        self.trace = trace
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
