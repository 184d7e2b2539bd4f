"""
Logger construction shared by the simulator components.
"""

import logging
from pathlib import Path
from typing import Optional, Union

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logger(name: str,
                 logs_path: Optional[Union[str, Path]] = None,
                 level: int = logging.INFO) -> logging.Logger:
    """
    Set up a named logger.

    Args:
        name: Logger name (usually the owning class name)
        logs_path: Directory for a ``<name>.log`` file handler; no file is
            written when None
        level: Logging level

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)

    if logs_path is not None and not any(isinstance(h, logging.FileHandler) for h in logger.handlers):
        # Create logs directory if it doesn't exist
        logs_dir = Path(logs_path)
        logs_dir.mkdir(parents=True, exist_ok=True)

        handler = logging.FileHandler(logs_dir / f"{name}.log")
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)

    return logger
