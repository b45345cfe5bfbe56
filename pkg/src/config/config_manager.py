"""Configuration manager for loading, layering and validating experiment settings."""

import copy
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from dotenv import load_dotenv

from ..models.experiment_config import PROFILE_PRESETS, PROFILES, ExperimentConfig
from ..utils.error_handler import ConfigurationError
from ..utils.logging_config import get_logger

ENV_PREFIX = "COMPRINT_"


class ConfigManager:
    """
    Resolves the experiment configuration from layered sources.

    Precedence, lowest first: built-in defaults, profile preset, config
    file, COMPRINT_* environment variables, command-line overrides.
    """

    # Environment variable -> nested config path
    ENV_MAPPINGS: Dict[str, List[str]] = {
        'RUNS_ROOT': ['runs_root'],
        'PROFILE': ['profile'],
        'SEED': ['seed'],
        'WORKERS': ['workers'],
        'CORPUS': ['dataset', 'corpus'],
        'DEVICE': ['model', 'device'],
        'LOG_LEVEL': ['logging', 'level'],
    }
    INT_KEYS = {'SEED', 'WORKERS'}

    def __init__(
        self,
        config_file: Optional[str] = None,
        profile: Optional[str] = None,
        overrides: Optional[Dict[str, Any]] = None
    ):
        """
        Nothing is read until the first get, get_config or load_config.

        Args:
            config_file: YAML file; None searches the default locations
            profile: Profile preset ('desk' or 'paper'), overriding file and environment
            overrides: Nested mapping applied last (command-line values)
        """
        self.logger = get_logger(__name__)
        self.explicit_file = config_file is not None
        self.config_file = config_file or self._find_config_file()
        self.profile = profile
        self.overrides = overrides or {}
        self._config_data: Optional[Dict[str, Any]] = None
        self._config: Optional[ExperimentConfig] = None

    def _find_config_file(self) -> str:
        """First existing file among COMPRINT_CONFIG, config/ and ~/.comprint-lab/."""
        possible_paths = [
            os.getenv(f'{ENV_PREFIX}CONFIG'),
            'config/config.yaml',
            'config/config.yml',
            os.path.expanduser('~/.comprint-lab/config.yaml'),
        ]
        for path in possible_paths:
            if path and Path(path).exists():
                self.logger.debug(f"Found config file: {path}")
                return path
        # absent default file means built-in defaults only
        return 'config/config.yaml'

    def _read_file(self) -> Dict[str, Any]:
        path = Path(self.config_file)
        if not path.exists():
            if self.explicit_file:
                raise ConfigurationError(f"config file not found: {path}")
            self.logger.debug(f"No config file at {path}, using defaults")
            return {}
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"invalid YAML in {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path} must contain a mapping at top level")
        self.logger.debug(f"Loaded config from: {path}")
        return data

    def load_config(self) -> Dict[str, Any]:
        """
        Merge every configuration layer into one mapping.

        Returns:
            The resolved mapping, cached until reload_config

        Raises:
            ConfigurationError: Missing explicit file, bad YAML or unknown profile
        """
        if self._config_data is not None:
            return self._config_data

        load_dotenv()
        file_data = self._read_file()
        env_data = self._env_overrides()
        profile = (self.profile or self.overrides.get('profile') or env_data.get('profile')
                   or file_data.get('profile') or 'desk')
        if profile not in PROFILES:
            raise ConfigurationError(f"unknown profile '{profile}', expected one of: {', '.join(PROFILES)}")

        data = self._get_default_config()
        for layer in (PROFILE_PRESETS[profile], file_data, env_data, self.overrides):
            self._deep_update(data, layer)
        data['profile'] = profile
        self._config_data = data
        return data

    def _get_default_config(self) -> Dict[str, Any]:
        """Built-in values of every section plus the logging block."""
        data = ExperimentConfig().to_dict()
        data['logging'] = {'level': 'INFO', 'json': False, 'directory': None}
        return data

    def _deep_update(self, target: Dict[str, Any], source: Dict[str, Any]) -> None:
        """Recursively overlay `source` onto `target`; None values do not override."""
        for key, value in source.items():
            if value is None:
                continue
            if isinstance(value, dict) and isinstance(target.get(key), dict):
                self._deep_update(target[key], value)
            else:
                target[key] = copy.deepcopy(value)

    def _env_overrides(self) -> Dict[str, Any]:
        """Collect COMPRINT_* environment variable overrides."""
        result: Dict[str, Any] = {}
        for name, config_path in self.ENV_MAPPINGS.items():
            value: Any = os.getenv(f'{ENV_PREFIX}{name}')
            if value is None or value == '':
                continue
            if name in self.INT_KEYS:
                try:
                    value = int(value)
                except ValueError:
                    raise ConfigurationError(f"{ENV_PREFIX}{name} must be an integer, got '{value}'") from None
            self._set_nested_value(result, config_path, value)
            self.logger.debug(f"Applied env override: {ENV_PREFIX}{name} = {value}")
        return result

    def _set_nested_value(self, data: Dict[str, Any], path: List[str], value: Any):
        """Create intermediate mappings along `path` and assign `value` at its end."""
        current = data
        for key in path[:-1]:
            current = current.setdefault(key, {})
        current[path[-1]] = value

    def get(self, key: str, default: Any = None) -> Any:
        """
        Look up a resolved value by dotted path.

        Args:
            key: Dot-separated key (e.g., 'model.depth')
            default: Default value if key not found

        Returns:
            Resolved value, or `default` when any path segment is missing
        """
        current: Any = self.load_config()
        try:
            for k in key.split('.'):
                current = current[k]
            return current
        except (KeyError, TypeError):
            return default

    def get_config(self) -> ExperimentConfig:
        """
        Get the configuration as a validated ExperimentConfig.

        Raises:
            ConfigurationError: If any value is invalid
        """
        if self._config is None:
            self._config = ExperimentConfig.from_dict(self.load_config())
        return self._config

    def validate_config(self) -> List[str]:
        """
        Cross-field checks the dataclasses cannot do alone.

        Returns:
            Problems found; empty when the configuration is usable
        """
        errors = []
        try:
            config = self.get_config()
        except ConfigurationError as e:
            return [str(e)]
        corpus = config.dataset.corpus
        if corpus and not Path(corpus).is_dir():
            errors.append(f"dataset.corpus is not a directory: {corpus}")
        if config.localization.window > config.dataset.test_size:
            errors.append(
                f"localization.window {config.localization.window} exceeds dataset.test_size {config.dataset.test_size}"
            )
        if config.model.patch_size > config.dataset.train_size:
            errors.append(f"model.patch_size {config.model.patch_size} exceeds dataset.train_size")
        if config.model.tile >= 2 * config.dataset.test_size:
            errors.append(f"model.tile {config.model.tile} cannot be reflect-padded from dataset.test_size "
                          f"{config.dataset.test_size}")
        return errors

    def save_config(self, config_path: str) -> bool:
        """
        Write the resolved configuration as YAML (config.resolved.yaml in a run).

        Returns:
            False when the file could not be written
        """
        save_path = Path(config_path)
        try:
            save_path.parent.mkdir(parents=True, exist_ok=True)
            with open(save_path, 'w', encoding='utf-8') as f:
                yaml.safe_dump(self.load_config(), f, default_flow_style=False, sort_keys=False, indent=2)
            self.logger.info(f"resolved configuration written to {save_path}")
            return True
        except OSError as e:
            self.logger.error(f"could not write {save_path}: {e}")
            return False

    def reload_config(self):
        """Drop the cached layers and resolve them again."""
        self._config_data = None
        self._config = None
        self.load_config()
