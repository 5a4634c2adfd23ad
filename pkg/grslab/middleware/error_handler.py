"""
Global error handling for CLI runs.
Maps exceptions to exit codes and prints a structured error payload on stderr.
"""
import sys
import traceback
from typing import Callable

import orjson

from grslab.core.exceptions import EXIT_FAILURE, GrslabError
from grslab.core.logging_config import get_logger

logger = get_logger(__name__)


def report_error(payload: dict) -> None:
    sys.stderr.buffer.write(orjson.dumps(payload, option=orjson.OPT_APPEND_NEWLINE))
    sys.stderr.flush()


def handle_grslab_error(exc: GrslabError) -> int:
    """Log a known error, print its payload and return its exit code."""
    logger.warning(
        "run_failed",
        error_code=exc.error_code,
        message=exc.message,
        details=exc.details,
        exit_code=exc.exit_code,
    )
    report_error(exc.to_payload())
    return exc.exit_code


def handle_unexpected_error(exc: Exception) -> int:
    """Log with traceback; any unexpected failure is an analysis failure (exit 1)."""
    logger.error(
        "unhandled_exception",
        error=str(exc),
        error_type=type(exc).__name__,
        traceback=traceback.format_exc(),
    )
    report_error({
        "error": {
            "code": "INTERNAL_ERROR",
            "message": "An unexpected error occurred.",
            "details": {"error_type": type(exc).__name__, "error": str(exc)},
        }
    })
    return EXIT_FAILURE


def run_guarded(run: Callable[[], int]) -> int:
    """Call `run` and turn any exception into its exit code."""
    try:
        return run()
    except GrslabError as exc:
        return handle_grslab_error(exc)
    except Exception as exc:
        return handle_unexpected_error(exc)
