"""Exception hierarchy shared by every module in the package."""


class PowerCalError(Exception):
    """Base class for all errors raised by powercal."""


class DomainError(PowerCalError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class MomentError(PowerCalError, ValueError):
    """A requested prior moment does not exist (diverges)."""


class DegenerateDataError(PowerCalError, ValueError):
    """The data leave an estimator undefined (e.g. MLE on the boundary)."""


class CalibrationDomainError(PowerCalError, ValueError):
    """A calibration equation has no solution inside the parameter domain."""


class UnsupportedPairError(PowerCalError, TypeError):
    """The model/prior pair has no closed-form path for this operation."""


class NumericalError(PowerCalError, ArithmeticError):
    """Base class for failures of the numerical kernels."""


class ConvergenceError(NumericalError):
    """A numerical routine stopped before reaching its tolerance.

    ``estimate`` and ``error`` carry the best value reached, if any.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class BracketError(NumericalError):
    """The root bracket does not contain a sign change."""

    def __init__(self, message, f_lo=None, f_hi=None):
        super().__init__(message)
        self.f_lo = f_lo
        self.f_hi = f_hi


class EvaluationError(NumericalError):
    """A user-supplied function returned NaN or raised during evaluation."""


class DegenerateGridError(NumericalError):
    """A tabulated density underflowed to zero everywhere."""
