"""
Timestamp Utilities - Building Block: TimestampUtil

Purpose:
    UTC timestamps for logs, report metadata and run directories.
    Every timestamp is ISO-8601 with a 'Z' suffix, never a local offset.

Output Data:
    - "2025-01-15T10:30:00.123456Z" style strings
    - filesystem-safe compact stamps ("20250115T103000Z")
"""

from datetime import datetime, timezone


class TimestampUtil:
    """UTC timestamp helpers."""

    @staticmethod
    def get_utc_now() -> str:
        """
        Current UTC time in ISO-8601 format with 'Z' suffix.

        Example:
            >>> TimestampUtil.get_utc_now()
            '2025-01-15T10:30:00.123456Z'
        """
        return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")

    @staticmethod
    def get_compact_stamp() -> str:
        """UTC stamp usable in file names, e.g. '20250115T103000Z'."""
        return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def utc_now() -> str:
    """Shorthand for TimestampUtil.get_utc_now()."""
    return TimestampUtil.get_utc_now()


def compact_stamp() -> str:
    return TimestampUtil.get_compact_stamp()
