"""
poissonet.logging_config - Centralized logging configuration for poissonet.

Provides rotating file logging plus a console handler. Every record is
stamped with the active run context (subcommand and seed) so interleaved
runs in one log file stay distinguishable.
"""

import logging
import logging.handlers
from pathlib import Path
from typing import Optional, Union

from .config import get_config_dir

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - [%(run)s] %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

logger = logging.getLogger(__name__)

_run_context = "-"


def set_run_context(command: Optional[str] = None, seed: Optional[int] = None) -> str:
    """
    Set the context stamped on subsequent log records.

    Returns:
        The context string, e.g. "infer seed=7"
    """
    global _run_context
    parts = []
    if command:
        parts.append(command)
    if seed is not None:
        parts.append(f"seed={seed}")
    _run_context = " ".join(parts) or "-"
    return _run_context


class RunContextFilter(logging.Filter):
    """Logging filter that attaches the run context as record.run."""

    def filter(self, record: logging.LogRecord) -> bool:
        if not hasattr(record, "run"):
            record.run = _run_context
        return True


def get_log_path() -> Path:
    """Default log file: poissonet.log in the config directory."""
    return get_config_dir() / "poissonet.log"


def setup_logging(
    level: str = "INFO",
    max_bytes: int = 10 * 1024 * 1024,
    backup_count: int = 3,
    log_path: Optional[Union[str, Path]] = None,
    console_level: str = "WARNING",
) -> Path:
    """
    Configure logging for the application.

    Sets up a rotating file handler and a console handler, both carrying the
    run-context filter.

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        max_bytes: Maximum size of log file before rotation (default: 10MB)
        backup_count: Number of backup log files to keep (default: 3)
        log_path: Log file, default poissonet.log in the config directory
        console_level: Minimum level echoed to stderr

    Returns:
        Path of the log file

    Example:
        >>> setup_logging(level="DEBUG", max_bytes=5*1024*1024)
    """
    numeric_level = getattr(logging, level.upper(), logging.INFO)
    path = Path(log_path) if log_path is not None else get_log_path()
    path.parent.mkdir(parents=True, exist_ok=True)

    root_logger = logging.getLogger()
    root_logger.setLevel(numeric_level)

    # Remove any existing handlers to avoid duplicates
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    file_handler = logging.handlers.RotatingFileHandler(
        path, maxBytes=max_bytes, backupCount=backup_count, encoding="utf-8"
    )
    file_handler.setLevel(numeric_level)
    file_handler.setFormatter(formatter)
    file_handler.addFilter(RunContextFilter())
    root_logger.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(getattr(logging, console_level.upper(), logging.WARNING))
    console_handler.setFormatter(formatter)
    console_handler.addFilter(RunContextFilter())
    root_logger.addHandler(console_handler)

    logger.info(f"Logging initialized - Level: {level}, Log file: {path}")
    return path

