"""Log records stamped with the current run and model.

A run is one CLI invocation or one HTTP request; `run_scope` binds its id and
model name for everything logged inside, worker threads of `fan_out` included.
"""

import logging
import sys
import uuid
from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar

run_id_ctx: ContextVar[str] = ContextVar("run_id", default="-")
model_ctx: ContextVar[str] = ContextVar("model", default="-")

LOG_FORMAT = "%(asctime)s %(levelname)s run_id=%(run_id)s model=%(model)s %(name)s: %(message)s"

# chatty below WARNING; only let them through when the lab itself runs at DEBUG
LIBRARY_LOGGERS = ("uvicorn.access", "httpx", "httpcore")


class RunIdFilter(logging.Filter):
    def filter(self, record: logging.LogRecord) -> bool:
        record.run_id = run_id_ctx.get()
        record.model = model_ctx.get()
        return True


def configure_logging(level: str | int = logging.INFO) -> None:
    root = logging.getLogger()
    root.setLevel(level)

    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT))
    handler.addFilter(RunIdFilter())

    root.handlers.clear()
    root.addHandler(handler)

    library_level = logging.DEBUG if root.level <= logging.DEBUG else logging.WARNING
    for name in LIBRARY_LOGGERS:
        logging.getLogger(name).setLevel(library_level)


@contextmanager
def run_scope(run_id: str | None = None, model: str | None = None) -> Iterator[str]:
    """Bind a run id (fresh when None) and an optional model name; yields the id."""
    rid = run_id or new_run_id()
    run_token = run_id_ctx.set(rid)
    model_token = model_ctx.set(model or "-")
    try:
        yield rid
    finally:
        model_ctx.reset(model_token)
        run_id_ctx.reset(run_token)


def new_run_id() -> str:
    return uuid.uuid4().hex[:16]
