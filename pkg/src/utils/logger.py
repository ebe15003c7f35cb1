"""Logging configuration using loguru"""

import os
import sys
from pathlib import Path
from typing import Optional, Union

from loguru import logger

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"
LOG_DIR = os.getenv("MARATHON_LOG_DIR", "logs")


def configure_logging(
    level: Optional[str] = None,
    log_dir: Optional[Union[str, Path]] = LOG_DIR
) -> None:
    """Install the console sink and the rotating DEBUG file sink.

    Args:
        level: Console level; defaults to ``MARATHON_LOG_LEVEL`` or INFO
        log_dir: Directory of the daily log files (``MARATHON_LOG_DIR``); None disables the file sink
    """
    logger.remove()
    logger.add(sys.stderr, format=CONSOLE_FORMAT, level=level or os.getenv("MARATHON_LOG_LEVEL", "INFO"))
    if log_dir is None:
        return
    log_dir = Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    logger.add(
        str(log_dir / "marathon_{time:YYYY-MM-DD}.log"),
        rotation="10 MB",
        retention="30 days",
        format=FILE_FORMAT,
        level="DEBUG"
    )


configure_logging()

__all__ = ["logger", "configure_logging"]
