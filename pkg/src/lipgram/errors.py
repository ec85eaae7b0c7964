"""Exception hierarchy shared by every lipgram module."""


class LipError(Exception):
    """Base class for all lipgram errors."""


class ShapeError(LipError, ValueError):
    """Operands have incompatible or invalid shapes."""


class NonFiniteError(LipError, ValueError):
    """Input contains NaN or Inf."""


class NumericalError(LipError, ArithmeticError):
    """A computation overflowed or produced a degenerate intermediate."""


class ConvergenceError(NumericalError):
    """An iterative routine hit its iteration cap.

    ``best_residual`` carries the smallest convergence measure seen.
    """

    def __init__(self, message, best_residual=float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class FormatError(LipError, ValueError):
    """A weight file or network description is malformed."""
