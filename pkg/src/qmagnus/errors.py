"""Exception and warning types raised across the package."""

from __future__ import annotations


class QMagnusError(Exception):
    """Base class for all package errors."""


# linear algebra
class NotSquare(QMagnusError, ValueError):
    pass


class NotHermitian(QMagnusError, ValueError):
    pass


class NotAntiHermitian(QMagnusError, ValueError):
    pass


class NotUnitary(QMagnusError, ValueError):
    pass


class DimensionMismatch(QMagnusError, ValueError):
    pass


class ConvergenceFailure(QMagnusError, ArithmeticError):
    pass


# discretization
class GridTooSmall(QMagnusError, ValueError):
    pass


class NonFiniteSample(QMagnusError, ValueError):
    pass


class UnsupportedDimension(QMagnusError, ValueError):
    pass


class DenseModeRequired(QMagnusError, RuntimeError):
    pass


# stepping, studies, reporting
class NonPositiveDenominator(QMagnusError, ValueError):
    pass


class InsufficientPoints(QMagnusError, ValueError):
    pass


class AllPointsFloored(InsufficientPoints):
    pass


class DomainError(QMagnusError, ValueError):
    pass


class ConfigError(QMagnusError, ValueError):
    pass


class BoundViolation(QMagnusError, AssertionError):
    """A measured error exceeded a proven bound; carries the partial report."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class RegimeViolation(UserWarning):
    """Step size outside the window 1/N <= dt <= 1 where uniform bounds are proven."""


class QuadratureContamination(UserWarning):
    """Reference quadrature error is not negligible against the measured error."""
