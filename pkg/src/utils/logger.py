# Logger - Centralized Logging System
# Singleton pattern + JSON structured logging for file output

"""
Logger Module

Responsibilities:
- One `ihope` logger namespace; every component logs as `ihope.<Component>`
- Console: human-readable plain text (stderr, stdout stays free for CLI output)
- File: JSON structured logging (one object per line, attached on demand)
- Prevent duplicate handler registration
"""

import json
import logging
import sys
import atexit
import traceback
from datetime import datetime, timezone
from pathlib import Path
from logging.handlers import RotatingFileHandler
from typing import Optional

ROOT_LOGGER_NAME = "ihope"

# Global registry to track configured loggers
_configured_loggers = {}
_file_handler: Optional[RotatingFileHandler] = None


class JSONFormatter(logging.Formatter):
    """JSON formatter for structured log output (file handler)."""

    def format(self, record: logging.LogRecord) -> str:
        log_entry = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }

        # Extra fields, e.g. logger.info("msg", extra={"user_id": "u07"})
        reserved = {
            "name", "msg", "args", "created", "relativeCreated",
            "exc_info", "exc_text", "stack_info", "lineno", "funcName",
            "filename", "module", "pathname", "thread", "threadName",
            "process", "processName", "levelname", "levelno", "message",
            "msecs", "taskName",
        }
        for key, value in record.__dict__.items():
            if key not in reserved and not key.startswith("_"):
                log_entry[key] = value

        if record.exc_info and record.exc_info[0] is not None:
            log_entry["exception"] = {
                "type": record.exc_info[0].__name__,
                "message": str(record.exc_info[1]),
                "traceback": traceback.format_exception(*record.exc_info),
            }

        return json.dumps(log_entry, default=str)


def _root_logger() -> logging.Logger:
    root = logging.getLogger(ROOT_LOGGER_NAME)
    if not root.handlers:
        root.setLevel(logging.INFO)
        root.propagate = False

        console_formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(console_formatter)
        root.addHandler(console_handler)

        def cleanup_handlers():
            for handler in root.handlers[:]:
                try:
                    handler.close()
                    root.removeHandler(handler)
                except Exception:
                    pass

        atexit.register(cleanup_handlers)
    return root


def setup_logger(name: str = ROOT_LOGGER_NAME, level: str = "INFO", log_file: str = None):
    """
    Get the component logger `ihope.<name>`.

    Returns existing logger if already configured (singleton pattern).
    Handlers live on the namespace root; components only carry a level.

    Args:
        name: Component name
        level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Optional log file path (JSON structured output)

    Returns:
        Configured logger instance
    """
    if name in _configured_loggers:
        return _configured_loggers[name]

    _root_logger()
    full_name = name if name.startswith(ROOT_LOGGER_NAME) else f"{ROOT_LOGGER_NAME}.{name}"
    logger = logging.getLogger(full_name)
    if full_name != ROOT_LOGGER_NAME:
        logger.setLevel(logging.NOTSET)
    if log_file:
        configure_logging(level, log_file)

    _configured_loggers[name] = logger
    return logger


def configure_logging(level: str = "INFO", log_file: Optional[str] = None) -> logging.Logger:
    """
    Set the namespace level and (re)attach the JSON file handler.

    Called once by the CLI after config is merged.
    """
    global _file_handler

    root = _root_logger()
    root.setLevel(getattr(logging, str(level).upper(), logging.INFO))

    if _file_handler is not None:
        root.removeHandler(_file_handler)
        _file_handler.close()
        _file_handler = None

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        _file_handler = RotatingFileHandler(
            log_file,
            maxBytes=10485760,  # 10MB
            backupCount=5,
            encoding='utf-8'
        )
        _file_handler.setFormatter(JSONFormatter())
        _file_handler.setLevel(logging.DEBUG)
        root.addHandler(_file_handler)

    return root
