"""
Logging Configuration

This module provides structured logging configuration for star-rz
using structlog, so solver progress and benchmark cells carry key/value context.
"""

import logging
import sys
from typing import Any, Dict, Optional

import structlog
from structlog.types import Processor

from src.config.settings import get_settings


def setup_logging(level: Optional[str] = None) -> None:
    """Set up structured logging for the application."""
    settings = get_settings()
    level = level or settings.log_level

    # Configure standard library logging
    logging.basicConfig(
        format="%(message)s",
        stream=sys.stdout,
        level=getattr(logging, level.upper(), logging.INFO),
        force=True,
    )

    processors: list[Processor] = [
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]

    if settings.is_development:
        processors.extend([
            structlog.dev.ConsoleRenderer(colors=True),
        ])
    else:
        # JSON lines for test and production runs
        processors.extend([
            add_app_context,
            structlog.processors.JSONRenderer(),
        ])

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.stdlib.BoundLogger,
        logger_factory=structlog.stdlib.LoggerFactory(),
        context_class=dict,
        cache_logger_on_first_use=True,
    )


def add_app_context(logger: Any, name: str, event_dict: Dict[str, Any]) -> Dict[str, Any]:
    """Add application context to log entries."""
    settings = get_settings()

    event_dict["app"] = settings.app_name
    event_dict["version"] = settings.app_version
    event_dict["environment"] = settings.environment

    return event_dict


def log_iteration(
    solver: str, iteration: int, error_estimate: float, rank: int, **kwargs: Any
) -> None:
    """Log one fixed-point iteration."""
    logger = structlog.get_logger("iteration")
    logger.debug(
        "Fixed-point iteration",
        solver=solver,
        iteration=iteration,
        error_estimate=error_estimate,
        rank=rank,
        **kwargs,
    )


def log_experiment_event(experiment: str, event: str, **kwargs: Any) -> None:
    """Log benchmark progress."""
    logger = structlog.get_logger("experiment")
    logger.info("Experiment event", experiment=experiment, event=event, **kwargs)
