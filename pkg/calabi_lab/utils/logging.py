import logging
import sys
from typing import Optional

import structlog

from calabi_lab.config import LabConfig


def configure_logging(config: Optional[LabConfig] = None):
    """Configure structured logging; without a config the field defaults apply"""
    config = config or LabConfig.model_construct()
    level = getattr(logging, config.log_level)

    # Configure stdlib logging
    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=level,
    )

    # Configure structlog; stdout is reserved for results
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.StackInfoRenderer(),
            structlog.dev.set_exc_info,
            structlog.processors.TimeStamper(fmt="ISO"),
            structlog.dev.ConsoleRenderer() if config.debug else structlog.processors.JSONRenderer(),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


def get_logger(name: str = None) -> structlog.typing.FilteringBoundLogger:
    """Get a structured logger"""
    return structlog.get_logger(name)
