# core/__init__.py
"""
Core package for the ROI exploration simulator.
"""

from core.models import Direction, GridRoi, ExplorationRun, BoundsReport
from core.dfs_explorer import Explorer, explore
from core.experiment_runner import ExperimentHarness

__all__ = [
    'Direction',
    'GridRoi',
    'ExplorationRun',
    'BoundsReport',
    'Explorer',
    'explore',
    'ExperimentHarness'
]
