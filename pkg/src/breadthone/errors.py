"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class BreadthOneError(Exception):
    """Base class for every error raised by this package."""


class ParseError(BreadthOneError, ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        super().__init__(message if line is None else f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class DimensionError(BreadthOneError, ValueError):
    pass


class BreadthNotOne(BreadthOneError):
    """The Jacobian at the point does not have corank exactly one."""


class ZeroMatrix(BreadthNotOne):
    """The Jacobian vanishes numerically (corank n >= 2)."""


class MultiplicityCapExceeded(BreadthOneError):
    pass


class SingularMatrixError(BreadthOneError, ArithmeticError):
    pass


class RefinementError(BreadthOneError):
    """MRRB1 lost breadth one, hit a singular step matrix, or diverged."""


class IntervalError(BreadthOneError, ArithmeticError):
    """Overflow or division by an interval containing zero."""


class VerificationFailure(BreadthOneError):
    def __init__(self, reason: str, stage: str = "krawczyk"):
        super().__init__(f"{stage}: {reason}")
        self.reason = reason
        self.stage = stage
