"""Structured JSON logging configuration and the per-run log context."""

import json
import logging
import re
import sys
import uuid
from contextlib import contextmanager
from contextvars import ContextVar
from datetime import datetime, timezone
from typing import Any, Dict, Iterator, Optional

# set per CLI invocation and per stub request
_run_id: ContextVar[str] = ContextVar("run_id", default="")
_RUN_ID_PATTERN = re.compile(r"[A-Za-z0-9._-]{1,64}")

_RESERVED = {
    "name", "msg", "args", "created", "filename", "funcName",
    "levelname", "levelno", "lineno", "module", "msecs",
    "message", "pathname", "process", "processName", "relativeCreated",
    "thread", "threadName", "exc_info", "exc_text", "stack_info",
    "asctime", "taskName", "getMessage",
}


class JSONLogFormatter(logging.Formatter):
    """JSON formatter, one object per line."""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as JSON."""
        log_data: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
            "severity": record.levelname,
            "message": record.getMessage(),
            "logger": record.name,
        }

        run_id = getattr(record, "run_id", None) or current_run_id()
        if run_id:
            log_data["run_id"] = run_id

        # extra= fields land directly on the record
        for key, value in record.__dict__.items():
            if key not in _RESERVED and key not in log_data:
                log_data[key] = value

        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        return json.dumps(log_data, default=str)


def setup_logging(log_level: str = "INFO") -> None:
    """
    Setup structured logging on stderr.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
    """
    root = logging.getLogger()
    root.setLevel(getattr(logging, log_level.upper(), logging.INFO))
    root.handlers.clear()

    # stdout is reserved for command output
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(logging.NOTSET)
    handler.setFormatter(JSONLogFormatter())
    root.addHandler(handler)

    noisy_loggers = [
        "httpx",
        "httpcore",
        "uvicorn",
        "uvicorn.error",
        "uvicorn.access",
        "matplotlib",
        "PIL",
        "asyncio",
    ]
    for name in noisy_loggers:
        logger = logging.getLogger(name)
        logger.setLevel(logging.WARNING)
        logger.propagate = False


def new_run_id() -> str:
    """Short random run id."""
    return uuid.uuid4().hex[:12]


def current_run_id() -> str:
    """Run id of the current context ("" outside any run)."""
    return _run_id.get()


@contextmanager
def bind_run_id(run_id: Optional[str] = None) -> Iterator[str]:
    """
    Tag every log record emitted inside the block with a run id.

    Missing or malformed ids (anything but 1-64 of ``[A-Za-z0-9._-]``) are
    replaced by a fresh one, so a caller-supplied header never reaches the
    logs verbatim. The previous id is restored on exit.
    """
    if not run_id or not _RUN_ID_PATTERN.fullmatch(run_id):
        run_id = new_run_id()
    token = _run_id.set(run_id)
    try:
        yield run_id
    finally:
        _run_id.reset(token)
