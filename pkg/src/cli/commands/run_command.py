"""Run command: the full pipeline, or a subset of its stages."""

import argparse
import asyncio
from pathlib import Path
from typing import Any, Dict

from .base_command import BaseCommand, CommandContext
from ...models.run_record import STAGES


class RunCommand(BaseCommand):
    """Execute pipeline stages in one run directory."""

    @property
    def name(self) -> str:
        return 'run'

    @property
    def description(self) -> str:
        return 'Run pipeline stages (dataset, train, extract, localize, evaluate, plot)'

    def add_parser(self, subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
        """Add run command parser."""
        parser = self._create_parser(
            subparsers,
            epilog="""
Examples:
  comprint-lab --profile desk run --corpus ~/photos         # every stage
  comprint-lab --out runs/desk-1a2b run localize evaluate   # reuse earlier stages
  comprint-lab --seed 3 --force run evaluate plot
            """
        )
        parser.add_argument('stages', nargs='*', metavar='STAGE',
                            help=f"Stages to run (default: all of {', '.join(STAGES)})")
        parser.add_argument('--corpus', type=Path, help='Directory of pristine images (dataset.corpus)')
        return parser

    def config_overrides(self, args: argparse.Namespace) -> Dict[str, Any]:
        return {'dataset': {'corpus': str(args.corpus)}} if args.corpus else {}

    async def execute(self, args: argparse.Namespace, context: CommandContext) -> Dict[str, Any]:
        runner = context.runner
        record = await asyncio.to_thread(runner.run_pipeline, args.stages or None)
        stages = {name: record.stage(name).status.value for name in STAGES}
        return self._format_result(
            True, f"Run {record.run_id} finished in {runner.run_dir}",
            status='completed', run_dir=str(runner.run_dir),
            details={'config_hash': record.config_hash, 'stages': stages}
        )
