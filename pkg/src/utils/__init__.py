"""Logger shared by every marathon subsystem"""

from .logger import configure_logging, logger

__all__ = ["logger", "configure_logging"]
