"""Exception types raised across the package.

Each error carries enough context to point at the offending input. CLI exit
codes key off ``UsageError`` (2) versus every other ``SphereHeatError`` (3).
"""


class SphereHeatError(Exception):
    """Base class for all package errors."""


class UsageError(SphereHeatError):
    """Invalid combination of options (maps to exit code 2)."""


class ZeroVector(SphereHeatError, ValueError):
    pass


class NegativeEntry(SphereHeatError, ValueError):
    pass


class NotUnit(SphereHeatError, ValueError):
    pass


class DimensionMismatch(SphereHeatError, ValueError):
    pass


class DimensionTooSmall(SphereHeatError, ValueError):
    pass


class InvalidOrder(SphereHeatError, ValueError):
    pass


class InvalidArgument(SphereHeatError, ValueError):
    pass


class InvalidParams(SphereHeatError, ValueError):
    pass


class TruncationExceeded(SphereHeatError, RuntimeError):
    pass


class GridTooCoarse(SphereHeatError, ValueError):
    pass


class OutOfDomain(SphereHeatError, ValueError):
    pass


class QuadratureFailure(SphereHeatError, RuntimeError):
    pass


class MatrixTooLarge(SphereHeatError, ValueError):
    pass


class EmptyClass(SphereHeatError, ValueError):
    pass


class ParseError(SphereHeatError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)


class NegativeValueForCountData(SphereHeatError, ValueError):
    pass


class ClassTooSmall(SphereHeatError, ValueError):
    pass


class ClassSmallerThanK(SphereHeatError, ValueError):
    pass


class TooFewWalkers(SphereHeatError, ValueError):
    pass


class NoConvergence(UserWarning):
    """Warning emitted when SMO hits its iteration cap; the model is flagged."""
