"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class QuasiSquareError(Exception):
    """Base class for library errors."""


class DegenerateTrajectoryError(QuasiSquareError, ValueError):
    """Both theta-dot and gamma-dot*sin(theta) vanish on an interior stretch."""


class DesignError(QuasiSquareError, ValueError):
    """A requested design violates its construction premises."""


class ConvergenceError(QuasiSquareError, RuntimeError):
    """An iterative solver exhausted its budget.

    ``info`` carries whatever diagnostics the solver had (best residuals,
    iteration counts) so callers can report them.
    """

    def __init__(self, message, info=None):
        super().__init__(message)
        self.info = dict(info or {})


class IntegrationError(QuasiSquareError, RuntimeError):
    """Time propagation failed (step-size underflow, non-finite data)."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
