"""
Run context for log tracing.
Binds a run id and the command name into the structlog context for one CLI run.
"""
import hashlib
from contextlib import contextmanager
from typing import Iterator

import structlog

from grslab.core.serialization import dumps
from grslab.schemas.config import RunConfig


def run_id_for(config: RunConfig) -> str:
    """Stable id: the same config echo and seed always give the same id."""
    digest = hashlib.sha256(dumps(config.echo()))
    return digest.hexdigest()[:16]


@contextmanager
def run_context(command: str, config: RunConfig) -> Iterator[str]:
    """
    Bind `run_id` and `command` for every log line emitted inside the block.

    - The id is derived from the config, so reruns can be matched in logs
    - Context is cleared on exit, including when the run raises
    """
    run_id = run_id_for(config)
    structlog.contextvars.bind_contextvars(run_id=run_id, command=command)
    try:
        yield run_id
    finally:
        structlog.contextvars.clear_contextvars()
