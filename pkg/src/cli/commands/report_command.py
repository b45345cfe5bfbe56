"""Report command: run status and trend verdicts."""

import argparse
from pathlib import Path
from typing import Any, Dict

from .base_command import BaseCommand, CommandContext
from ...evaluation.grid import read_grid
from ...evaluation.trends import compare_trends
from ...experiment_runner import GRID_FILE
from ...utils.error_handler import MissingArtifactError


class ReportCommand(BaseCommand):
    """Summarize a run directory or a result grid."""

    @property
    def name(self) -> str:
        return 'report'

    @property
    def description(self) -> str:
        return 'Show stage status and qualitative trend verdicts'

    def add_parser(self, subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
        """Add report command parser."""
        parser = self._create_parser(
            subparsers,
            epilog="""
Examples:
  comprint-lab --out runs/desk-1a2b report
  comprint-lab report --grid results/grid.csv --save trends.yaml
  comprint-lab --json report
            """
        )
        parser.add_argument('--grid', type=Path, help='Result grid CSV instead of a run directory')
        parser.add_argument('--save', type=Path, help='Also write the trend report as YAML')
        return parser

    async def execute(self, args: argparse.Namespace, context: CommandContext) -> Dict[str, Any]:
        if args.grid is not None:
            grid_path = args.grid
            summary: Dict[str, Any] = {'grid': str(grid_path)}
        else:
            grid_path = context.runner.store.stage_dir('evaluate') / GRID_FILE
            summary = context.runner.summarize()

        if grid_path.is_file():
            report = compare_trends(read_grid(grid_path))
            summary['trends'] = {c.key: c.verdict.value for c in report.claims}
            if args.save:
                summary['saved'] = str(report.save(args.save))
        elif args.grid is not None or args.save:
            raise MissingArtifactError('evaluate', f"no result grid at {grid_path}")

        failed = [key for key, verdict in summary.get('trends', {}).items() if verdict == 'fail']
        message = f"{len(failed)} trend(s) failed: {', '.join(failed)}" if failed else "No failed trends"
        return self._format_result(True, message, status='failed trends' if failed else 'ok', details=summary)
