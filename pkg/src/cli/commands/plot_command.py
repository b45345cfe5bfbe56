"""Plot command: QF-pair curves and recompression matrices."""

import argparse
import asyncio
from pathlib import Path
from typing import Any, Dict, List

from .base_command import BaseCommand, CommandContext
from ...evaluation.grid import read_grid
from ...evaluation.plots import plot_qf_curves, plot_recompression_matrix
from ...experiment_runner import QF_CURVES_FILE
from ...models.compression import LOSSLESS_VARIANT, VARIANTS
from ...utils.error_handler import MissingArtifactError


class PlotCommand(BaseCommand):
    """Draw figures from a result grid."""

    @property
    def name(self) -> str:
        return 'plot'

    @property
    def description(self) -> str:
        return 'Plot QF-pair curves and recompression matrices'

    def add_parser(self, subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
        """Add plot command parser."""
        parser = self._create_parser(
            subparsers,
            epilog="""
Examples:
  comprint-lab --out runs/desk-1a2b plot              # the run's plot stage
  comprint-lab plot --grid results/grid.csv --figures figures/ --model HighQF
            """
        )
        parser.add_argument('--grid', type=Path, help='Result grid CSV (default: plot stage of the run)')
        parser.add_argument('--figures', type=Path, help='Figure directory (default: next to --grid)')
        parser.add_argument('--variant', default=LOSSLESS_VARIANT, choices=VARIANTS,
                            help='Variant of the QF-pair curves (default: lossless)')
        parser.add_argument('--model', action='append', dest='models',
                            help='Recompression matrix for this model; repeat for several (default: all)')
        return parser

    async def execute(self, args: argparse.Namespace, context: CommandContext) -> Dict[str, Any]:
        if args.grid is None:
            record = await asyncio.to_thread(context.runner.run_pipeline, ['plot'])
            stage = record.stage('plot')
            return self._format_result(
                True, f"Plot stage {stage.status.value} in {context.runner.run_dir}",
                outputs=stage.artifact_paths
            )
        if not args.grid.is_file():
            raise MissingArtifactError('evaluate', f"no result grid at {args.grid}")

        grid = read_grid(args.grid)
        out_dir = args.figures or args.grid.parent
        paths: List[Path] = list(plot_qf_curves(grid, out_dir / QF_CURVES_FILE, variant=args.variant))
        for model in args.models or [m for m in grid.models
                                     if any(grid.has_variant(m, v) for v in VARIANTS if v != LOSSLESS_VARIANT)]:
            paths += plot_recompression_matrix(grid, model, out_dir / f"recompression_{model.lower()}.png")
        return self._format_result(True, f"Wrote {len(paths)} files to {out_dir}",
                                   outputs=[str(p) for p in paths])
