"""
Performance Monitoring

This module provides timing and metric collection for star-rz:
- In-memory metric buffer with per-name summaries
- Repeated timing with median and spread
- A decorator that records execution time and success of a call
"""

import statistics
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from functools import wraps
from typing import Any, Callable, Dict, List, Optional, ParamSpec, Tuple, TypeVar, Union

import structlog

P = ParamSpec("P")
T = TypeVar("T")


class MetricType(Enum):
    """Types of metrics tracked."""

    COUNTER = "counter"
    GAUGE = "gauge"
    HISTOGRAM = "histogram"
    TIMER = "timer"


@dataclass
class PerformanceMetric:
    """Performance metric data structure."""

    name: str
    value: Union[int, float]
    timestamp: datetime
    metric_type: MetricType
    labels: Dict[str, str]
    description: str = ""


@dataclass(frozen=True)
class TimingSummary:
    """Median and spread of repeated wall-clock measurements in seconds."""

    median: float
    spread: float
    samples: Tuple[float, ...] = field(default_factory=tuple)

    @classmethod
    def from_samples(cls, samples: List[float]) -> "TimingSummary":
        if not samples:
            return cls(median=float("nan"), spread=float("nan"), samples=())
        return cls(
            median=statistics.median(samples),
            spread=max(samples) - min(samples),
            samples=tuple(samples),
        )


class PerformanceMonitor:
    """In-process metric collection."""

    def __init__(self, buffer_limit: int = 100_000) -> None:
        """Initialize performance monitor."""
        self.logger = structlog.get_logger(__name__)
        self.metrics_buffer: List[PerformanceMetric] = []
        self.buffer_limit = buffer_limit

    def track_metric(
        self,
        name: str,
        value: Union[int, float],
        metric_type: MetricType = MetricType.GAUGE,
        labels: Optional[Dict[str, str]] = None,
        description: str = "",
    ) -> None:
        """
        Track a performance metric.

        Args:
            name: Metric name
            value: Metric value
            metric_type: Type of metric
            labels: Optional labels for the metric
            description: Metric description
        """
        metric = PerformanceMetric(
            name=name,
            value=value,
            timestamp=datetime.now(timezone.utc),
            metric_type=metric_type,
            labels=labels or {},
            description=description,
        )
        self.metrics_buffer.append(metric)
        if len(self.metrics_buffer) > self.buffer_limit:
            del self.metrics_buffer[: len(self.metrics_buffer) - self.buffer_limit]

        self.logger.debug("Metric tracked", name=name, value=value, type=metric_type.value)

    def get_metrics_summary(self, name: Optional[str] = None) -> Dict[str, Dict[str, float]]:
        """Summary statistics per metric name."""
        metrics_by_name: Dict[str, List[float]] = {}
        for metric in self.metrics_buffer:
            if name is not None and metric.name != name:
                continue
            metrics_by_name.setdefault(metric.name, []).append(float(metric.value))

        summary: Dict[str, Dict[str, float]] = {}
        for metric_name, values in metrics_by_name.items():
            summary[metric_name] = {
                "count": float(len(values)),
                "median": statistics.median(values),
                "min": min(values),
                "max": max(values),
                "latest": values[-1],
            }
        return summary

    def clear(self) -> None:
        self.metrics_buffer.clear()


# Global performance monitor instance
performance_monitor = PerformanceMonitor()


def time_repeated(
    func: Callable[[], T], repeats: int, metric_name: Optional[str] = None
) -> Tuple[T, TimingSummary]:
    """
    Run ``func`` ``repeats`` times and summarize wall-clock time.

    Returns the result of the last run with the timing summary. Each sample is
    recorded as a timer metric when ``metric_name`` is given.
    """
    if repeats < 1:
        raise ValueError("repeats must be at least 1")

    samples: List[float] = []
    result: Any = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = func()
        elapsed = time.perf_counter() - start
        samples.append(elapsed)
        if metric_name:
            performance_monitor.track_metric(metric_name, elapsed, MetricType.TIMER)

    return result, TimingSummary.from_samples(samples)


def track_performance(
    metric_name: str, labels: Optional[Dict[str, str]] = None
) -> Callable[[Callable[P, T]], Callable[P, T]]:
    """Decorator to track function execution time and success."""

    def decorator(func: Callable[P, T]) -> Callable[P, T]:
        @wraps(func)
        def wrapper(*args: P.args, **kwargs: P.kwargs) -> T:
            start_time = time.perf_counter()
            success = True
            try:
                return func(*args, **kwargs)
            except Exception:
                success = False
                raise
            finally:
                performance_monitor.track_metric(
                    f"{metric_name}_duration",
                    time.perf_counter() - start_time,
                    MetricType.TIMER,
                    labels,
                    f"Execution time for {func.__name__}",
                )
                performance_monitor.track_metric(
                    f"{metric_name}_success",
                    1 if success else 0,
                    MetricType.COUNTER,
                    labels,
                    f"Success of {func.__name__}",
                )

        return wrapper

    return decorator
