"""comprint-lab command line: global flags, configuration resolution and command dispatch."""

import argparse
import asyncio
import json
import sys
import traceback
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from .. import __version__
from ..config.config_manager import ConfigManager
from ..utils.error_handler import EXIT_OK, ComprintError, ConfigurationError, ErrorHandler
from ..utils.logging_config import LoggingConfig, LogLevel, get_logger, setup_application_logging
from .commands import (
    BaseCommand, CommandContext, DatasetCommand, EvaluateCommand, ExtractCommand,
    LocalizeCommand, PlotCommand, ReportCommand, RunCommand, TrainCommand
)

EXIT_INTERRUPTED = 130

EPILOG = """
Examples:
  comprint-lab run --corpus ~/photos                  # full desk-profile experiment
  comprint-lab --profile paper --seed 1 run dataset train
  comprint-lab --out runs/desk-1a2b report --json
  comprint-lab localize --comprint comprints/ --out heatmaps/

Exit codes: 0 success, 1 configuration error, 2 missing upstream artifact, 3 runtime failure
"""

# Result keys rendered as nested blocks; the rest are printed as `key: value`
_BLOCK_KEYS = ('details', 'statistics')
_HIDDEN_KEYS = {'success', 'message', 'timestamp', 'outputs'}


def _deep_merge(target: Dict[str, Any], source: Dict[str, Any]) -> Dict[str, Any]:
    for key, value in source.items():
        if isinstance(value, dict) and isinstance(target.get(key), dict):
            _deep_merge(target[key], value)
        else:
            target[key] = value
    return target


def render_result(result: Dict[str, Any], verbose: bool = False) -> str:
    """Human-readable form of a command result; nested sections as YAML."""
    lines = [result.get('message', '')]
    for key, value in result.items():
        if key in _HIDDEN_KEYS or key in _BLOCK_KEYS:
            continue
        lines.append(f"{key}: {value}")
    for key in _BLOCK_KEYS:
        if result.get(key):
            plain = json.loads(json.dumps(result[key], default=str))
            block = yaml.safe_dump(plain, sort_keys=False, default_flow_style=False).rstrip()
            lines.append(f"\n{key}:")
            lines += [f"  {line}" for line in block.splitlines()]
    outputs = result.get('outputs') or []
    if outputs:
        if verbose:
            lines.append("\noutputs:")
            lines += [f"  {path}" for path in outputs]
        else:
            lines.append(f"outputs: {len(outputs)} files (--verbose lists them)")
    return "\n".join(lines)


class ComprintCLI:
    """
    Command line interface of comprint-lab.

    Global flags resolve the configuration (file, profile, seed, workers)
    and the run directory; each command adds its own overrides before the
    configuration is validated.
    """

    def __init__(self):
        self.logger = get_logger(__name__)
        self.error_handler = ErrorHandler()
        commands: List[BaseCommand] = [
            DatasetCommand(), TrainCommand(), ExtractCommand(), LocalizeCommand(),
            EvaluateCommand(), PlotCommand(), RunCommand(), ReportCommand(),
        ]
        self.commands: Dict[str, BaseCommand] = {command.name: command for command in commands}

    def create_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            prog='comprint-lab',
            description='Comprint - compression fingerprints for image forgery localization',
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog=EPILOG,
        )
        parser.add_argument('--config', '-c', type=Path,
                            help='Path to configuration file (default: config/config.yaml)')
        parser.add_argument('--profile', choices=['paper', 'desk'], help='Scale preset (default: desk)')
        parser.add_argument('--seed', type=int, help='Global random seed')
        parser.add_argument('--out', dest='run_dir', type=Path,
                            help='Run directory (default: <runs_root>/<profile>-<config hash>)')
        parser.add_argument('--force', action='store_true',
                            help='Recompute stages whose cached outputs came from another configuration')
        parser.add_argument('--workers', type=int, help='Worker threads inside a stage')
        parser.add_argument('--log-level', '-l', choices=[level.value for level in LogLevel],
                            help='Logging level (default: logging.level of the config, INFO)')
        parser.add_argument('--quiet', '-q', action='store_true', help='Suppress console logging')
        parser.add_argument('--verbose', '-v', action='store_true',
                            help='List output files and print tracebacks on errors')
        parser.add_argument('--json', action='store_true', help='Print results as JSON')
        parser.add_argument('--version', action='version', version=f'comprint-lab {__version__}')

        subparsers = parser.add_subparsers(dest='command', help='Available commands', metavar='COMMAND')
        for command in self.commands.values():
            command.add_parser(subparsers)
        return parser

    def _overrides(self, args: argparse.Namespace, command: BaseCommand) -> Dict[str, Any]:
        overrides: Dict[str, Any] = {}
        if args.seed is not None:
            overrides['seed'] = args.seed
        if args.workers is not None:
            overrides['workers'] = args.workers
        if args.log_level:
            overrides['logging'] = {'level': args.log_level}
        return _deep_merge(overrides, command.config_overrides(args))

    def _context(self, args: argparse.Namespace, command: BaseCommand) -> CommandContext:
        """
        Resolve and validate the configuration, then set up logging from it.

        Raises:
            ComprintError: Invalid file, flags or environment
        """
        config_manager = ConfigManager(
            str(args.config) if args.config else None,
            profile=args.profile,
            overrides=self._overrides(args, command),
        )
        config_manager.get_config()
        return CommandContext(
            config_manager=config_manager,
            run_dir=args.run_dir,
            force=args.force,
            show_progress=not args.quiet and sys.stderr.isatty(),
            logging_config=self._configure_logging(args, config_manager),
        )

    async def run(self, args: Optional[List[str]] = None) -> int:
        """Parse `args` (sys.argv when None), execute the command and return its exit code."""
        parser = self.create_parser()
        parsed = parser.parse_args(args)
        if not parsed.command:
            parser.print_help()
            return EXIT_OK
        command = self.commands[parsed.command]

        try:
            context = self._context(parsed, command)
        except ComprintError as e:
            print(f"Configuration error: {e}", file=sys.stderr)
            return ErrorHandler.exit_code_for(e)

        try:
            result = await command.execute(parsed, context)
        except KeyboardInterrupt:
            self.logger.info("Cancelled by user")
            return EXIT_INTERRUPTED
        except Exception as e:
            self.error_handler.handle_error(e, context={'command': parsed.command})
            if parsed.verbose:
                traceback.print_exc()
            return ErrorHandler.exit_code_for(e)

        if isinstance(result, dict):
            print(json.dumps(result, indent=2, default=str) if parsed.json else render_result(result, parsed.verbose))
        elif result is not None:
            print(result)
        return EXIT_OK

    def _configure_logging(self, args: argparse.Namespace, config_manager: ConfigManager) -> LoggingConfig:
        """Root logger from the resolved `logging` section and the CLI flags."""
        name = str(config_manager.get('logging.level', 'INFO')).upper()
        try:
            level = LogLevel(name)
        except ValueError:
            raise ConfigurationError(f"unknown logging.level '{name}'") from None
        directory = config_manager.get('logging.directory')
        return setup_application_logging(
            log_level=level,
            log_dir=Path(directory) if directory else None,
            console_logging=not args.quiet,
            file_logging=bool(directory),
            json_format=bool(config_manager.get('logging.json', False)),
        )


def main(argv: Optional[List[str]] = None) -> int:
    cli = ComprintCLI()
    try:
        return asyncio.run(cli.run(argv))
    except KeyboardInterrupt:
        print("\nCancelled by user", file=sys.stderr)
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())
