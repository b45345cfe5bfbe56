"""Base command class and shared context for CLI commands."""

import argparse
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

from ...config.config_manager import ConfigManager
from ...experiment_runner import ExperimentRunner
from ...models.experiment_config import ExperimentConfig
from ...utils.logging_config import LoggingConfig


@dataclass
class CommandContext:
    """What a command needs from the application shell."""

    config_manager: ConfigManager
    run_dir: Optional[Path] = None
    force: bool = False
    show_progress: bool = False
    logging_config: Optional[LoggingConfig] = None
    _runner: Optional[ExperimentRunner] = field(default=None, repr=False)

    @property
    def config(self) -> ExperimentConfig:
        return self.config_manager.get_config()

    @property
    def runner(self) -> ExperimentRunner:
        """Runner bound to `--out` or the default run directory of the config."""
        if self._runner is None:
            self._runner = ExperimentRunner(self.config, run_dir=self.run_dir, force=self.force,
                                            show_progress=self.show_progress,
                                            logging_config=self.logging_config)
        return self._runner


class BaseCommand(ABC):
    """
    Base class for all CLI commands.

    Commands contribute configuration overrides before the configuration
    is resolved, then execute against a `CommandContext`.
    """

    @property
    @abstractmethod
    def name(self) -> str:
        """Command name."""
        pass

    @property
    @abstractmethod
    def description(self) -> str:
        """Command description."""
        pass

    @abstractmethod
    def add_parser(self, subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
        """
        Add command parser to subparsers.

        Args:
            subparsers: Subparsers action from main parser

        Returns:
            Command-specific argument parser
        """
        pass

    @abstractmethod
    async def execute(self, args: argparse.Namespace, context: CommandContext) -> Any:
        """
        Execute the command.

        Args:
            args: Parsed command line arguments
            context: Configuration and run directory of this invocation

        Returns:
            Command result (usually a dict from `_format_result`)
        """
        pass

    def config_overrides(self, args: argparse.Namespace) -> Dict[str, Any]:
        """Nested configuration values set by this command's flags."""
        return {}

    def _create_parser(self, subparsers: argparse._SubParsersAction, **kwargs) -> argparse.ArgumentParser:
        """
        Create a parser for this command with common options.

        Args:
            subparsers: Subparsers action from main parser
            **kwargs: Additional arguments for add_parser

        Returns:
            Command parser
        """
        parser = subparsers.add_parser(
            self.name,
            description=self.description,
            help=self.description,
            formatter_class=argparse.RawDescriptionHelpFormatter,
            **kwargs
        )
        return parser

    @staticmethod
    def _add_seed_argument(parser: argparse.ArgumentParser) -> None:
        # SUPPRESS keeps the global --seed when the command-level flag is absent
        parser.add_argument('--seed', type=int, default=argparse.SUPPRESS,
                            help='Random seed (same as the global --seed)')

    def _format_result(self, success: bool, message: str, **kwargs) -> Dict[str, Any]:
        """
        Format command result in standard format.

        Args:
            success: Whether the command succeeded
            message: Result message
            **kwargs: Additional result data

        Returns:
            Formatted result dictionary
        """
        result = {
            'success': success,
            'message': message,
            'timestamp': datetime.now().isoformat()
        }
        result.update(kwargs)
        return result
