"""Exception and warning types raised across the package."""


class ApfixError(Exception):
    """Base class for all package errors."""


class HypothesisViolation(ApfixError):
    """A standing assumption on the model coefficients does not hold."""


class RegimeUnsupported(ApfixError):
    """The exponents (m, n) fall outside the regime the solver handles."""


class UnsupportedCoefficient(ApfixError):
    """A coefficient expression is outside the class a routine can handle."""


class DomainError(ApfixError, ValueError):
    """A function was evaluated outside its domain (e.g. negative state)."""


class GridError(ApfixError, ValueError):
    """Two grid functions that must share a grid do not."""


class InsufficientHistory(ApfixError):
    """A delayed lookup falls before the start of the available data."""


class SandwichViolation(ApfixError):
    """The initial bracket (u0, v0) is not a lower/upper solution pair."""

    def __init__(self, message: str, t: float | None = None, excess: float | None = None):
        super().__init__(message)
        self.t = t
        self.excess = excess


class PositivityLoss(UserWarning):
    """A forward integration produced a non-positive state."""
