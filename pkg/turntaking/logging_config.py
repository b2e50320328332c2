"""
Structured Logging for Pipeline Runs

Sets up structlog for every stage of the pipeline.
Logs are rendered as JSON for batch runs collected by log aggregators, or as a
coloured console stream for interactive use.

Design Decisions:
- Use structlog for structured, contextual logging
- Log to stderr so stdout stays available for reports
- Convert numpy scalars and small arrays before rendering
- Never write log records into artifacts (artifacts must be reproducible)
"""

import logging
import sys
from typing import Any

import numpy as np
import structlog
from structlog.types import EventDict, WrappedLogger

from turntaking import __version__
from turntaking.config import get_settings

_configured = False


def coerce_numpy_values(
    logger: WrappedLogger, method_name: str, event_dict: EventDict
) -> EventDict:
    """
    Processor converting numpy values to plain Python types.

    The JSON renderer only understands builtin types; numpy integers and
    arrays would otherwise be rendered through repr().
    """
    def coerce(value: Any) -> Any:
        if isinstance(value, np.generic):
            return value.item()
        if isinstance(value, np.ndarray):
            return value.tolist() if value.size <= 32 else f"<array shape={value.shape}>"
        if isinstance(value, dict):
            return {k: coerce(v) for k, v in value.items()}
        return value

    return {key: coerce(value) for key, value in event_dict.items()}


def add_app_context(
    logger: WrappedLogger, method_name: str, event_dict: EventDict
) -> EventDict:
    """Add application context to every log entry."""
    event_dict["app"] = "vr-turn-taking"
    event_dict["version"] = __version__
    return event_dict


def setup_logging(level: str | None = None) -> None:
    """
    Configure structured logging for the process.

    Safe to call more than once; later calls only adjust the level.

    Args:
        level: Optional override of the configured log level
    """
    global _configured
    settings = get_settings()
    log_level = (level or settings.log_level).upper()

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, log_level))
    if _configured:
        return

    shared_processors = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.UnicodeDecoder(),
        add_app_context,
        coerce_numpy_values,
    ]

    structlog.configure(
        processors=shared_processors + [
            structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    if settings.log_json_format:
        renderer: Any = structlog.processors.JSONRenderer()
    else:
        renderer = structlog.dev.ConsoleRenderer(colors=sys.stderr.isatty())

    formatter = structlog.stdlib.ProcessorFormatter(
        foreign_pre_chain=shared_processors,
        processors=[
            structlog.stdlib.ProcessorFormatter.remove_processors_meta,
            renderer,
        ],
    )

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(formatter)
    root_logger.addHandler(handler)

    # Worker pools are chatty at INFO
    logging.getLogger("joblib").setLevel(logging.WARNING)
    _configured = True


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """
    Get a logger instance with the given name.

    Usage:
        logger = get_logger(__name__)
        logger.info("Loaded recording", session_id="g01-w1", users=4)

    Args:
        name: Logger name (typically __name__)

    Returns:
        Configured structlog logger
    """
    return structlog.get_logger(name)


def bind_context(**values: Any) -> None:
    """Bind key/value pairs to every subsequent log entry of this context."""
    structlog.contextvars.bind_contextvars(**values)
