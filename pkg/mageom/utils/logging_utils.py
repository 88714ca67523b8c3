"""
Logging utilities for the engine.

Reports go to stdout, so log records are written to stderr unless another
stream is given.
"""

import json
import logging
import sys
from typing import IO, Optional

from ..config import LOG_FORMAT, LOG_LEVEL

SIMPLE_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"


class JsonFormatter(logging.Formatter):
    """One JSON object per record; messages often quote expressions, so they are escaped."""

    def format(self, record: logging.LogRecord) -> str:
        entry = {
            "timestamp": self.formatTime(record),
            "level": record.levelname,
            "name": record.name,
            "message": record.getMessage(),
        }
        if record.exc_info:
            entry["exception"] = self.formatException(record.exc_info)
        return json.dumps(entry)


def _resolve_level(level: Optional[str]) -> int:
    return getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO)


def setup_logging(
    name: Optional[str] = None,
    level: Optional[str] = None,
    fmt: Optional[str] = None,
    stream: Optional[IO[str]] = None,
) -> logging.Logger:
    """
    Set up and configure logging.

    Args:
        name: Logger name, defaults to root logger if None
        level: Level name, defaults to LOG_LEVEL
        fmt: "simple" or "json", defaults to LOG_FORMAT
        stream: Output stream, defaults to stderr

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    # Replace handlers from earlier calls
    logger.handlers = []
    logger.setLevel(_resolve_level(level))

    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setLevel(_resolve_level(level))
    if (fmt or LOG_FORMAT).lower() == "json":
        handler.setFormatter(JsonFormatter())
    else:
        handler.setFormatter(logging.Formatter(SIMPLE_FORMAT))
    logger.addHandler(handler)

    # Prevent propagation to the root logger
    logger.propagate = False

    return logger
