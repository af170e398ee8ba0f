"""
Custom Exception Classes for Information Loss Computations

This module defines a unified exception hierarchy for consistent error handling.
Every exception carries a machine-readable code and the process exit code the
CLI returns when it is not handled.
"""

from typing import Optional, Dict, Any


class InfoLossException(Exception):
    """
    Base exception for all infoloss errors.

    Provides a consistent error structure across the library and the CLI.
    """
    def __init__(
        self,
        message: str,
        code: str,
        details: Optional[str] = None,
        exit_code: int = 1
    ):
        self.message = message
        self.code = code
        self.details = details
        self.exit_code = exit_code
        super().__init__(self.message)

    def to_dict(self) -> Dict[str, Any]:
        """Convert exception to dictionary for JSON reports"""
        error_dict = {
            "code": self.code,
            "message": self.message,
        }
        if self.details:
            error_dict["details"] = self.details
        return error_dict


# ================================================================
# Configuration Errors (exit 2)
# ================================================================

class ConfigurationError(InfoLossException):
    """Raised when an experiment config cannot be read or does not validate."""
    def __init__(self, message: str, details: Optional[str] = None):
        super().__init__(
            message=message,
            code="CONFIG_ERROR",
            details=details,
            exit_code=2
        )


class InvalidParameterError(InfoLossException):
    """Raised when a function or density parameter is invalid."""
    def __init__(self, parameter_name: str, reason: str):
        super().__init__(
            message=f"Invalid parameter '{parameter_name}': {reason}",
            code="INVALID_PARAMETER",
            details=reason,
            exit_code=2
        )


class MissingParameterError(InfoLossException):
    """Raised when required parameters are missing."""
    def __init__(self, parameter_name: str):
        super().__init__(
            message=f"Required parameter '{parameter_name}' is missing",
            code="MISSING_PARAMETER",
            details=f"Please provide '{parameter_name}' in the parameters",
            exit_code=2
        )


class UnknownCatalogEntryError(InfoLossException):
    """Raised when a catalog function or builtin density name is unknown."""
    def __init__(self, name: str, available: list):
        super().__init__(
            message=f"Unknown catalog entry '{name}'",
            code="UNKNOWN_CATALOG_ENTRY",
            details=f"Available entries: {', '.join(available)}",
            exit_code=2
        )


class InvalidIntervalError(InfoLossException):
    """Raised when an interval is not proper (lo >= hi or NaN ends)."""
    def __init__(self, lo: float, hi: float):
        super().__init__(
            message=f"Interval [{lo}, {hi}] is not proper",
            code="INVALID_INTERVAL",
            details="Intervals need lo < hi",
            exit_code=2
        )


class DensityError(InfoLossException):
    """Raised when a density cannot be constructed (zero mass, bad table)."""
    def __init__(self, reason: str):
        super().__init__(
            message=f"Invalid density: {reason}",
            code="DENSITY_ERROR",
            details=reason,
            exit_code=2
        )


# ================================================================
# Function Errors (exit 3)
# ================================================================

class FunctionValidationError(InfoLossException):
    """Raised when a function fails the piecewise strict monotonicity checks."""
    def __init__(self, report: Any):
        self.report = report
        failed = ", ".join(report.failed_checks) if report is not None else "unknown"
        super().__init__(
            message=f"Function failed validation ({failed})",
            code="FUNCTION_VALIDATION_FAILED",
            details="; ".join(report.messages) if report is not None else None,
            exit_code=3
        )


class SupportMismatchError(InfoLossException):
    """Raised when the density support is not covered by the function domain."""
    def __init__(self, reason: str):
        super().__init__(
            message=f"Support mismatch: {reason}",
            code="SUPPORT_MISMATCH",
            details=reason,
            exit_code=3
        )


class CompositionError(InfoLossException):
    """Raised when two stages cannot be composed into a piecewise monotone map."""
    def __init__(self, reason: str):
        super().__init__(
            message=f"Composition failed: {reason}",
            code="COMPOSITION_FAILED",
            details=reason,
            exit_code=3
        )


# ================================================================
# Numerical Errors
# ================================================================

class QuadratureConvergenceError(InfoLossException):
    """Raised when adaptive quadrature does not reach the requested tolerance."""
    def __init__(self, report: Any, reason: str):
        self.report = report
        super().__init__(
            message=f"Quadrature did not converge: {reason}",
            code="QUADRATURE_NOT_CONVERGED",
            details=reason,
            exit_code=4
        )


class UndefinedConditionalError(InfoLossException):
    """Raised when a conditional is requested at an output with zero density."""
    def __init__(self, y: float):
        super().__init__(
            message=f"Output density is zero at y={y}",
            code="UNDEFINED_CONDITIONAL",
            details="p(w|y) is undefined where f_Y(y) = 0",
            exit_code=1
        )


class EstimatorError(InfoLossException):
    """Raised when a stochastic estimator cannot produce an estimate."""
    def __init__(self, reason: str):
        super().__init__(
            message=f"Estimator failed: {reason}",
            code="ESTIMATOR_FAILED",
            details=reason,
            exit_code=1
        )
