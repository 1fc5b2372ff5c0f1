"""
Structured Logging - Building Block: StructuredLogger

JSON lines on stderr (or a rotating file) for training, attack and
evaluation runs. Each record carries the run identifier, so logs of
several runs in one directory or sweep can be told apart afterwards.
Level, format and file come from the ``logging`` section of
config/config.yaml and the FIMGUARD_LOG_* environment variables.
"""

import json
import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, List, Optional

from .timestamp import utc_now

# Attributes every LogRecord has; anything else came in through ``extra=``.
_RESERVED = frozenset(
    logging.LogRecord("", 0, "", 0, "", (), None).__dict__.keys()
) | {"message", "asctime", "taskName"}

TEXT_FORMAT = "%(asctime)s %(levelname)-8s %(name)s: %(message)s"


def _parse_level(level: str) -> int:
    numeric = getattr(logging, level.upper(), None)
    if not isinstance(numeric, int):
        raise ValueError(f"Unknown log level {level!r}")
    return numeric


class JSONFormatter(logging.Formatter):
    """One JSON object per record: timestamp, level, logger, message, run_id, extras."""

    def __init__(self, run_id: Optional[str] = None):
        super().__init__()
        self.run_id = run_id

    def format(self, record: logging.LogRecord) -> str:
        entry: Dict[str, Any] = {
            "timestamp": utc_now(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        run_id = getattr(record, "run_id", None) or self.run_id
        if run_id:
            entry["run_id"] = run_id
        if record.exc_info:
            entry["exception"] = self.formatException(record.exc_info)
        entry.update(
            (key, value) for key, value in record.__dict__.items()
            if key not in _RESERVED and key != "run_id"
        )
        return json.dumps(entry, ensure_ascii=False, default=str)


def _build_handlers(formatter: logging.Formatter, stream: Any, log_file: Optional[str],
                    max_file_size_mb: int, backup_count: int) -> List[logging.Handler]:
    handlers: List[logging.Handler] = [logging.StreamHandler(stream or sys.stderr)]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(RotatingFileHandler(
            log_file, maxBytes=max_file_size_mb * 1024 * 1024,
            backupCount=backup_count, encoding="utf-8",
        ))
    for handler in handlers:
        handler.setFormatter(formatter)
    return handlers


class StructuredLogger:
    """
    Registry of configured fimguard loggers.

    Loggers are configured once per name and cached; the CLI retags all of
    them with the run id and adjusts their level after argument parsing.

    Example:
        >>> logger = StructuredLogger.setup_logger("fimguard.training", run_id="train-mu0.022")
        >>> logger.info("Epoch finished", extra={"epoch": 1, "loss": 0.31})
        {"timestamp": "2026-01-15T10:30:00.123456Z", "level": "INFO",
         "logger": "fimguard.training", "message": "Epoch finished",
         "run_id": "train-mu0.022", "epoch": 1, "loss": 0.31}
    """

    _loggers: Dict[str, logging.Logger] = {}

    @staticmethod
    def setup_logger(
        name: str,
        level: str = "INFO",
        run_id: Optional[str] = None,
        log_format: str = "json",
        log_file: Optional[str] = None,
        max_file_size_mb: int = 10,
        backup_count: int = 5,
        stream: Any = None,
    ) -> logging.Logger:
        """
        Configure (or fetch the cached) logger for ``name``.

        ``log_format`` is "json" or "text"; ``stream`` defaults to stderr so
        stdout stays free for data.
        """
        cached = StructuredLogger._loggers.get(name)
        if cached is not None:
            return cached

        numeric_level = _parse_level(level)
        if log_format == "json":
            formatter: logging.Formatter = JSONFormatter(run_id)
        else:
            formatter = logging.Formatter(TEXT_FORMAT, datefmt="%Y-%m-%dT%H:%M:%SZ")

        logger = logging.getLogger(name)
        logger.setLevel(numeric_level)
        logger.propagate = False
        logger.handlers.clear()
        for handler in _build_handlers(formatter, stream, log_file, max_file_size_mb, backup_count):
            handler.setLevel(numeric_level)
            logger.addHandler(handler)

        StructuredLogger._loggers[name] = logger
        return logger

    @staticmethod
    def set_run_id(run_id: Optional[str]) -> None:
        """Retag every cached JSON logger with a new run id."""
        for logger in StructuredLogger._loggers.values():
            for handler in logger.handlers:
                if isinstance(handler.formatter, JSONFormatter):
                    handler.formatter.run_id = run_id

    @staticmethod
    def set_level(level: str) -> None:
        numeric_level = _parse_level(level)
        for logger in StructuredLogger._loggers.values():
            logger.setLevel(numeric_level)
            for handler in logger.handlers:
                handler.setLevel(numeric_level)


def setup_logger(name: str, level: Optional[str] = None, run_id: Optional[str] = None,
                 **kwargs: Any) -> logging.Logger:
    """
    Module-level entry point; level, format and file default to the settings.

    Example:
        >>> logger = setup_logger(__name__)
        >>> logger.info("Checkpoint saved", extra={"path": "out/model.ckpt"})
    """
    from ..config.settings import settings

    kwargs.setdefault("log_format", settings.log_format)
    kwargs.setdefault("log_file", settings.log_file)
    return StructuredLogger.setup_logger(name, level or settings.log_level, run_id, **kwargs)


def log_with_context(logger: logging.Logger, level: str, message: str, **context: Any) -> None:
    """``log_with_context(logger, "info", "Attack finished", attack="ossa", fooled=41)``"""
    getattr(logger, level.lower())(message, extra=context)
