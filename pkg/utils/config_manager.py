"""
Configuration manager for the ROI exploration simulator.
Provides a centralized system for managing simulation, geometry, sensing
and harness settings.
"""

import copy
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Union

import yaml

logger = logging.getLogger(__name__)


class ConfigManager:
    """Manages all configuration settings for the application."""

    VERIFICATION_TIERS = ('QUICK', 'FULL')

    def __init__(self, config_file: Union[str, Path] = 'config.yaml'):
        """
        Initialize the configuration manager.

        Args:
            config_file: Path to the configuration file
        """
        self.config_file = Path(config_file)

        self.defaults: Dict[str, Any] = {
            'paths': {
                'results': 'results',
                'logs': 'logs'
            },
            'simulation': {
                'cells': 120,
                'robots': 20,
                'speed_ratio': 2.5,
                'translation_speed': 1.0,
                'trials': 100,
                'master_seed': 2024
            },
            'sweep_grids': {
                'cells': [40, 80, 120, 160, 200],
                'robots': [1, 2, 4, 8, 16, 32],
                'speed_ratio': [1.5, 2.0, 2.5, 3.0, 4.0]
            },
            'geometry': {
                'boundary_samples': 8,
                'ball_samples': 32,
                'fatness_tolerance': 0.01,
                'corner_angle_deg': 150.0,
                'offset_resolution': 0.05
            },
            'sensing': {
                'p_fp': 27 / 483,
                'p_fn': 53 / 483,
                'samples_per_cell': 5,
                'majority_threshold': 3,
                'map_margin': 2
            },
            'verification': {
                'QUICK': {
                    'max_opt_cells': 6,
                    'random_opt_seeds': 20,
                    'fat_shapes': 50,
                    'audit_trials': 20,
                    'robot_scaling': False,
                    'sensing_draws': 0
                },
                'FULL': {
                    'max_opt_cells': 6,
                    'random_opt_seeds': 200,
                    'fat_shapes': 200,
                    'audit_trials': 100,
                    'robot_scaling': True,
                    'sensing_draws': 100000
                }
            },
            'harness': {
                'workers': 1,
                'output_format': 'csv',
                'bound_slack': 1e-9
            }
        }

        self.config = self._load_config()

    def _load_config(self) -> Dict[str, Any]:
        """
        Load configuration from file, merged over the defaults.

        Returns:
            Dict containing configuration settings
        """
        if not self.config_file.exists():
            return self._create_default_config()

        try:
            with open(self.config_file, 'r') as f:
                if self.config_file.suffix.lower() in ('.yaml', '.yml'):
                    loaded = yaml.safe_load(f) or {}
                else:
                    loaded = json.load(f)
        except Exception as e:
            logger.warning(f"Error loading configuration {self.config_file}: {e}; using defaults")
            return copy.deepcopy(self.defaults)

        return self._merge(copy.deepcopy(self.defaults), loaded)

    def _merge(self, base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        """Recursively overlay ``override`` on ``base``."""
        for key, value in override.items():
            if isinstance(value, dict) and isinstance(base.get(key), dict):
                base[key] = self._merge(base[key], value)
            else:
                base[key] = value
        return base

    def _create_default_config(self) -> Dict[str, Any]:
        """
        Create default configuration and write it to disk.

        Returns:
            Dict containing default configuration settings
        """
        default_config = copy.deepcopy(self.defaults)
        self._save_config(default_config)
        return default_config

    def _save_config(self, config: Dict[str, Any] = None) -> None:
        """
        Save configuration to file.

        Args:
            config: Configuration to save (uses self.config if None)
        """
        if config is None:
            config = self.config

        os.makedirs(os.path.dirname(self.config_file) or '.', exist_ok=True)

        try:
            with open(self.config_file, 'w') as f:
                if self.config_file.suffix.lower() in ('.yaml', '.yml'):
                    yaml.safe_dump(config, f, default_flow_style=False, sort_keys=False)
                else:
                    json.dump(config, f, indent=4)
        except Exception as e:
            logger.warning(f"Error saving configuration {self.config_file}: {e}")

    def save(self) -> None:
        """Save all configuration to file."""
        self._save_config()

    def set(self, section: str, key: str, value: Any) -> None:
        """
        Set a single configuration value.

        Args:
            section: Top-level section name
            key: Key inside the section
            value: New value
        """
        self.config.setdefault(section, {})[key] = value

    def _section(self, name: str) -> Dict[str, Any]:
        return dict(self.config.get(name, self.defaults[name]))

    def get_simulation_settings(self) -> Dict[str, Any]:
        """
        Get simulation defaults (C, R, speed ratio, trials, seed).

        Returns:
            Dict containing simulation settings
        """
        return self._section('simulation')

    def get_sweep_grids(self) -> Dict[str, List[float]]:
        """
        Get the sweep grids for the CELLS, ROBOTS and SPEED_RATIO sweeps.

        Returns:
            Dict mapping sweep name to its list of points
        """
        return self._section('sweep_grids')

    def get_geometry_settings(self) -> Dict[str, Any]:
        """
        Get geometry tolerances and sampling densities.

        Returns:
            Dict containing geometry settings
        """
        return self._section('geometry')

    def get_sensing_settings(self) -> Dict[str, Any]:
        """
        Get the noisy classifier settings.

        Returns:
            Dict containing sensing settings
        """
        return self._section('sensing')

    def get_verification_settings(self, tier: str) -> Dict[str, Any]:
        """
        Get case counts for a verification tier.

        Args:
            tier: 'QUICK' or 'FULL'

        Returns:
            Dict containing verification counts
        """
        tier = tier.upper()
        if tier not in self.VERIFICATION_TIERS:
            raise ValueError(f"Unknown verification tier: {tier}")
        tiers = self.config.get('verification', self.defaults['verification'])
        return dict(tiers.get(tier, self.defaults['verification'][tier]))

    def get_harness_settings(self) -> Dict[str, Any]:
        """
        Get harness execution settings.

        Returns:
            Dict containing harness settings
        """
        return self._section('harness')

    def get_results_path(self) -> str:
        """
        Get path to results directory.

        Returns:
            Path to results directory
        """
        return self.config.get('paths', {}).get('results', 'results')

    def get_logs_path(self) -> str:
        """
        Get path to logs directory.

        Returns:
            Path to logs directory
        """
        return self.config.get('paths', {}).get('logs', 'logs')
