"""
Utilities Module
================

Structured logging, rich console output and UTC timestamps shared by every
fimguard component.
"""

from .logger import StructuredLogger, log_with_context, setup_logger
from .timestamp import TimestampUtil, compact_stamp, utc_now

__all__ = [
    "StructuredLogger",
    "TimestampUtil",
    "compact_stamp",
    "log_with_context",
    "setup_logger",
    "utc_now",
]
