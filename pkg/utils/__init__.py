# utils/__init__.py
"""
Utilities package for the ROI exploration simulator.
"""

from utils.config_manager import ConfigManager
from utils.logging_utils import setup_logger

__all__ = ['ConfigManager', 'setup_logger']
