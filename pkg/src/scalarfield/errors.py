"""Exception hierarchy shared by all modules."""


class ScalarFieldError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ScalarFieldError, ValueError):
    """An argument lies outside the domain of an operation."""


class NumericalError(ScalarFieldError, ArithmeticError):
    """A quadrature or iteration did not reach its tolerance.

    Attributes
    ----------
    estimate : float
        The achieved error estimate.
    """

    def __init__(self, message, estimate=float("nan")):
        super().__init__(message)
        self.estimate = estimate


class EmptyAdmissibleSet(ScalarFieldError):
    """No field with positive regularized potential exists (the admissible set is empty)."""


class LineSearchFailure(ScalarFieldError):
    """The Armijo search could not produce a decrease away from stationarity."""


class NoGroundState(ScalarFieldError):
    """The shooting method found no overshoot/undershoot bracket."""
