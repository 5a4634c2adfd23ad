"""
structlog setup for grslab runs.

stdout belongs to JSON reports, so every log line goes to stderr. Console
rendering in development, JSON lines in CI and production; the run id and
subcommand are merged in from contextvars (see grslab.middleware.run_context).
"""
import logging
import sys

import numpy as np
import orjson
import structlog
from structlog.types import EventDict, Processor

from grslab.config import settings

# third-party loggers that chatter at INFO during jax startup
QUIET_LOGGERS = ("jax", "jax._src.xla_bridge", "absl")


def add_tool_context(logger: logging.Logger, method_name: str, event_dict: EventDict) -> EventDict:
    event_dict["tool"] = settings.PROJECT_NAME
    event_dict["version"] = settings.TOOL_VERSION
    if settings.DEBUG:
        event_dict["environment"] = settings.ENVIRONMENT
    return event_dict


def coerce_numpy(logger: logging.Logger, method_name: str, event_dict: EventDict) -> EventDict:
    """Residuals and eigenvalues often arrive as numpy scalars; log plain Python numbers."""
    for key, value in event_dict.items():
        if isinstance(value, np.generic):
            event_dict[key] = value.item()
    return event_dict


def _orjson_dumps(event_dict: EventDict, **kwargs) -> str:
    return orjson.dumps(event_dict, option=orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_NON_STR_KEYS).decode()


def wants_json() -> bool:
    return settings.LOG_FORMAT == "json" or settings.ENVIRONMENT in ("ci", "production")


def setup_logging() -> None:
    """Route stdlib logging and structlog to stderr at settings.LOG_LEVEL."""
    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=getattr(logging, settings.LOG_LEVEL),
        force=True,
    )
    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    processors: list[Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        add_tool_context,
        coerce_numpy,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.format_exc_info,
    ]
    if wants_json():
        processors.append(structlog.processors.JSONRenderer(serializer=_orjson_dumps))
    else:
        processors.append(structlog.dev.ConsoleRenderer(colors=False))

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )


def get_logger(name: str = __name__) -> structlog.stdlib.BoundLogger:
    return structlog.get_logger(name)
