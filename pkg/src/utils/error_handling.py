"""
Centralized Error Handling

This module provides the error taxonomy shared by every numerical service:
- Custom exception classes for argument refusals, budget guards and numerical failures
- Error classification of foreign exceptions (numpy, scipy, builtins)
- Severity-aware logging and error metrics
- A decorator that routes failures of an operation through the handler
"""

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from functools import wraps
from typing import Any, Callable, Dict, Optional, ParamSpec, TypeVar

import numpy as np
import structlog

from src.utils.monitoring import MetricType, performance_monitor

P = ParamSpec("P")
T = TypeVar("T")


class ErrorCategory(Enum):
    """Categories of errors for classification."""

    VALIDATION = "validation"  # Arguments outside the documented domain
    NUMERICAL = "numerical"  # Divergence, step underflow, singular factorizations
    BUDGET = "budget"  # Memory and eigencomputation guards
    CONFIGURATION = "configuration"  # Inconsistent experiment settings
    IO = "io"  # Result files
    UNKNOWN = "unknown"


class ErrorSeverity(Enum):
    """Severity levels for errors."""

    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


@dataclass
class ErrorContext:
    """Context information for errors."""

    service: str
    operation: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    metadata: Optional[Dict[str, Any]] = None


class StarRZError(Exception):
    """Base exception class for star-rz errors."""

    def __init__(
        self,
        message: str,
        category: ErrorCategory = ErrorCategory.UNKNOWN,
        severity: ErrorSeverity = ErrorSeverity.MEDIUM,
        context: Optional[ErrorContext] = None,
        original_error: Optional[BaseException] = None,
        recoverable: bool = False,
    ):
        super().__init__(message)
        self.message = message
        self.category = category
        self.severity = severity
        self.context = context
        self.original_error = original_error
        self.recoverable = recoverable
        self.timestamp = datetime.now(timezone.utc)

    def to_dict(self) -> Dict[str, Any]:
        """Serialize the error for log records and result metadata."""
        data: Dict[str, Any] = {
            "type": type(self).__name__,
            "message": self.message,
            "category": self.category.value,
            "severity": self.severity.value,
            "recoverable": self.recoverable,
            "timestamp": self.timestamp.isoformat(),
        }
        if self.context:
            data["service"] = self.context.service
            data["operation"] = self.context.operation
        if self.original_error is not None:
            data["original_error"] = repr(self.original_error)
        return data


class InvalidArgumentError(StarRZError, ValueError):
    """Argument outside the domain of an operation."""

    def __init__(self, message: str, field: Optional[str] = None, **kwargs: Any):
        super().__init__(
            message,
            category=ErrorCategory.VALIDATION,
            severity=ErrorSeverity.LOW,
            **kwargs,
        )
        self.field = field


class BudgetExceededError(StarRZError, ValueError):
    """Refusal by a memory or cost guard (dense cap, eigen budget, aliasing)."""

    def __init__(self, message: str, limit: int, requested: int, **kwargs: Any):
        super().__init__(
            message,
            category=ErrorCategory.BUDGET,
            severity=ErrorSeverity.MEDIUM,
            **kwargs,
        )
        self.limit = limit
        self.requested = requested


class ConfigurationError(StarRZError, ValueError):
    """Inconsistent experiment or CLI configuration."""

    def __init__(self, message: str, **kwargs: Any):
        super().__init__(
            message,
            category=ErrorCategory.CONFIGURATION,
            severity=ErrorSeverity.LOW,
            **kwargs,
        )


class DivergenceError(StarRZError, ArithmeticError):
    """Non-finite iterate in a fixed-point iteration."""

    def __init__(self, message: str, iteration: int, **kwargs: Any):
        super().__init__(
            message,
            category=ErrorCategory.NUMERICAL,
            severity=ErrorSeverity.HIGH,
            **kwargs,
        )
        self.iteration = iteration


class StiffnessError(StarRZError, ArithmeticError):
    """Adaptive step size fell below the underflow threshold."""

    def __init__(self, message: str, t: float, dt: float, **kwargs: Any):
        super().__init__(
            message,
            category=ErrorCategory.NUMERICAL,
            severity=ErrorSeverity.HIGH,
            **kwargs,
        )
        self.t = t
        self.dt = dt


class ErrorHandler:
    """Centralized error classification and logging."""

    def __init__(self) -> None:
        self.logger = structlog.get_logger(__name__)
        self.error_counts: Dict[str, int] = {}

    def handle_error(self, error: BaseException, context: ErrorContext) -> StarRZError:
        """
        Classify, log and count an error.

        Args:
            error: The exception that occurred
            context: Context information about the error

        Returns:
            The error mapped into the star-rz taxonomy
        """
        classified = self._classify_error(error, context)
        self._log_error(classified)
        self._track_error_metrics(classified)
        return classified

    def _classify_error(self, error: BaseException, context: ErrorContext) -> StarRZError:
        """Classify an error into the star-rz error taxonomy."""
        if isinstance(error, StarRZError):
            if error.context is None:
                error.context = context
            return error

        if isinstance(error, np.linalg.LinAlgError):
            return StarRZError(
                f"Linear algebra failure: {error}",
                category=ErrorCategory.NUMERICAL,
                severity=ErrorSeverity.HIGH,
                context=context,
                original_error=error,
            )

        if isinstance(error, (FloatingPointError, OverflowError, ZeroDivisionError)):
            return StarRZError(
                f"Floating point failure: {error}",
                category=ErrorCategory.NUMERICAL,
                severity=ErrorSeverity.HIGH,
                context=context,
                original_error=error,
            )

        if isinstance(error, MemoryError):
            return StarRZError(
                "Out of memory",
                category=ErrorCategory.BUDGET,
                severity=ErrorSeverity.CRITICAL,
                context=context,
                original_error=error,
            )

        if isinstance(error, OSError):
            return StarRZError(
                f"I/O failure: {error}",
                category=ErrorCategory.IO,
                severity=ErrorSeverity.MEDIUM,
                context=context,
                original_error=error,
            )

        if isinstance(error, (ValueError, TypeError)):
            return InvalidArgumentError(str(error), context=context, original_error=error)

        return StarRZError(str(error), context=context, original_error=error)

    def _log_error(self, error: StarRZError) -> None:
        """Log error with appropriate level and context."""
        log_data = error.to_dict()
        if error.context and error.context.parameters:
            log_data["parameters"] = error.context.parameters

        if error.severity == ErrorSeverity.CRITICAL:
            self.logger.critical("Critical error occurred", **log_data)
        elif error.severity == ErrorSeverity.HIGH:
            self.logger.error("High severity error occurred", **log_data)
        elif error.severity == ErrorSeverity.MEDIUM:
            self.logger.warning("Medium severity error occurred", **log_data)
        else:
            self.logger.info("Low severity error occurred", **log_data)

    def _track_error_metrics(self, error: StarRZError) -> None:
        """Track error counts by category."""
        key = error.category.value
        self.error_counts[key] = self.error_counts.get(key, 0) + 1
        performance_monitor.track_metric(
            "errors_total",
            1,
            MetricType.COUNTER,
            {
                "category": key,
                "severity": error.severity.value,
                "service": error.context.service if error.context else "unknown",
            },
        )

    def get_error_stats(self) -> Dict[str, int]:
        """Return error counts per category."""
        return dict(self.error_counts)

    def reset(self) -> None:
        """Clear error counts."""
        self.error_counts.clear()


# Global error handler instance
error_handler = ErrorHandler()


def with_error_handling(
    service_name: str, operation_name: str
) -> Callable[[Callable[P, T]], Callable[P, T]]:
    """Decorator that classifies and logs any failure of the wrapped operation."""

    def decorator(func: Callable[P, T]) -> Callable[P, T]:
        @wraps(func)
        def wrapper(*args: P.args, **kwargs: P.kwargs) -> T:
            try:
                return func(*args, **kwargs)
            except Exception as e:
                context = ErrorContext(service=service_name, operation=operation_name)
                classified = error_handler.handle_error(e, context)
                if classified is e:
                    raise
                raise classified from e

        return wrapper

    return decorator
