"""Logging configuration for loewnerlab."""

import json
import logging
import sys
import uuid
from datetime import datetime, timezone
from typing import Any

from .config import get_config_dir

UTC = timezone.utc

_STANDARD_ATTRS = frozenset(
    {
        "name",
        "msg",
        "args",
        "created",
        "filename",
        "funcName",
        "levelname",
        "levelno",
        "lineno",
        "module",
        "msecs",
        "pathname",
        "process",
        "processName",
        "relativeCreated",
        "stack_info",
        "exc_info",
        "exc_text",
        "thread",
        "threadName",
        "taskName",
        "message",
        "run_id",
    }
)


def _jsonable(value: Any) -> Any:
    """Fallback encoder for numpy values and complex coordinates."""
    if isinstance(value, complex):
        return [value.real, value.imag]
    if hasattr(value, "tolist"):
        return _jsonable(value.tolist())
    if isinstance(value, list | tuple):
        return [_jsonable(v) for v in value]
    return str(value)


class JSONFormatter(logging.Formatter):
    """JSON formatter for structured logging.

    Outputs one JSON object per record. Extra fields passed via `extra=`
    (step counts, swallowing times, sample sizes) are included as keys.
    """

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as JSON."""
        log_data: dict[str, Any] = {
            "timestamp": datetime.now(UTC).isoformat().replace("+00:00", "Z"),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }

        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        if hasattr(record, "run_id"):
            log_data["run_id"] = record.run_id

        for key, value in record.__dict__.items():
            if key not in _STANDARD_ATTRS and not key.startswith("_"):
                log_data[key] = value

        return json.dumps(log_data, default=_jsonable)


class ContextFilter(logging.Filter):
    """Filter that stamps the current run id onto every record."""

    def __init__(self, run_id: str | None = None):
        super().__init__()
        self.run_id = run_id or str(uuid.uuid4())[:8]

    def filter(self, record: logging.LogRecord) -> bool:
        """Add run_id to log record."""
        record.run_id = self.run_id
        return True


_context_filter: ContextFilter | None = None


def set_run_id(run_id: str | None = None) -> str:
    """Set the run id for the current logging context.

    Args:
        run_id: ID to use, or None to generate a new one

    Returns:
        The run id being used
    """
    global _context_filter
    if _context_filter is None:
        _context_filter = ContextFilter(run_id)
        logging.getLogger("loewnerlab").addFilter(_context_filter)
    else:
        _context_filter.run_id = run_id or str(uuid.uuid4())[:8]
    return _context_filter.run_id


def setup_logging(
    level: int = logging.INFO,
    log_to_file: bool = False,
    verbose: bool = False,
    json_format: bool = False,
    run_id: str | None = None,
) -> logging.Logger:
    """
    Set up logging for loewnerlab.

    Args:
        level: Logging level (default: INFO)
        log_to_file: Whether to also log to ~/.loewnerlab/logs/loewnerlab.log
        verbose: If True, set level to DEBUG and show all logs on console
        json_format: If True, use JSON format for structured logging
        run_id: Identifier stamped on every record (random if omitted)

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger("loewnerlab")
    logger.handlers.clear()

    if verbose:
        level = logging.DEBUG
    logger.setLevel(level)

    console_handler = logging.StreamHandler(sys.stderr)
    # Keep stdout clean for reports; stderr only shows warnings unless verbose.
    console_handler.setLevel(logging.DEBUG if verbose else logging.WARNING)

    if json_format:
        console_handler.setFormatter(JSONFormatter())
    elif verbose:
        console_handler.setFormatter(
            logging.Formatter(
                "%(asctime)s [%(levelname)s] %(name)s: %(message)s",
                datefmt="%H:%M:%S",
            )
        )
    else:
        console_handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    logger.addHandler(console_handler)

    if log_to_file:
        log_dir = get_config_dir() / "logs"
        log_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_dir / "loewnerlab.log")
        file_handler.setLevel(logging.DEBUG)
        if json_format:
            file_handler.setFormatter(JSONFormatter())
        else:
            file_handler.setFormatter(
                logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
            )
        logger.addHandler(file_handler)

    set_run_id(run_id)
    return logger

