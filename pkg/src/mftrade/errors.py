"""Exception hierarchy shared by every module.

Each failure mode has its own class so that callers (and the CLI) can map
them to distinct exit codes without parsing messages.
"""

from __future__ import annotations


class MFTradeError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(MFTradeError, ValueError):
    """A parameter lies outside the domain where the model is defined."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class OutOfRegimeError(ParameterDomainError):
    """Closed forms requested outside the small-band (a*q*^2 < 1) regime."""


class StabilityError(ParameterDomainError):
    """Discretization step too large for a stable recursion."""


class UnphysicalCalibrationError(ParameterDomainError):
    """1 + lambda * Xi^2 <= 0: the stationary variance would be negative."""


class UnreachableTargetError(ParameterDomainError):
    """Target risk at or below the minimum achievable risk."""


class DegenerateError(MFTradeError, ValueError):
    """Input collapses the problem (zero weights, zero cost, zero variance)."""


class InputError(MFTradeError, ValueError):
    """Malformed inputs, e.g. paths of unequal length."""


class NonStationaryFitError(MFTradeError):
    """AR(1) fit produced a coefficient outside (0, 1)."""

    def __init__(self, phi: float):
        super().__init__(f"non-stationary AR(1) fit: phi_hat={phi!r} not in (0, 1)")
        self.phi = phi


class NumericalFailureError(MFTradeError, RuntimeError):
    """Quadrature or root finding did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class InsufficientHorizonError(MFTradeError):
    """A Monte Carlo run observed no events, so no estimate is possible."""


class BoundaryHitError(MFTradeError):
    """Grid search ended with its optimum on the edge of the final grid."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class ConfigError(MFTradeError):
    """Configuration file could not be parsed or is missing fields."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field
