"""Evaluate command: max-MCC scoring of heatmaps against composite masks."""

import argparse
import asyncio
from pathlib import Path
from typing import Any, Dict

from .base_command import BaseCommand, CommandContext
from ...evaluation.evaluator import Evaluator
from ...evaluation.grid import write_grid, write_results
from ...experiment_runner import GRID_FILE, RESULTS_FILE
from ...models.compression import RECIPES
from ...models.dataset import DatasetManifest
from ...models.experiment_config import POOLING_MODES
from ...utils.error_handler import MissingArtifactError


def model_name_for(heatmap_dir: Path) -> str:
    """Recipe display name when the directory is named after a recipe."""
    key = heatmap_dir.name.lower()
    return RECIPES[key].name if key in RECIPES else heatmap_dir.name


class EvaluateCommand(BaseCommand):
    """Score one model's heatmaps and aggregate them into a result grid."""

    @property
    def name(self) -> str:
        return 'evaluate'

    @property
    def description(self) -> str:
        return 'Score heatmaps by best MCC and aggregate a result grid'

    def add_parser(self, subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
        """Add evaluate command parser."""
        parser = self._create_parser(
            subparsers,
            epilog="""
Examples:
  comprint-lab evaluate --heatmaps heatmaps/highqf --manifest data/manifest_test.json --out results/
  comprint-lab evaluate --heatmaps heatmaps/ --manifest data/manifest_test.json --out results/ --pooling pooled
            """
        )
        parser.add_argument('--heatmaps', required=True, type=Path, help='Directory of heatmap .npz files')
        parser.add_argument('--manifest', required=True, type=Path, help='Test-suite manifest (manifest_test.json)')
        parser.add_argument('--out', dest='out_dir', required=True, type=Path, help='Output directory')
        parser.add_argument('--thresholds', type=int, help='Number of candidate thresholds per sign')
        parser.add_argument('--pooling', choices=POOLING_MODES, help='Per-image (default) or pooled MCC')
        parser.add_argument('--model', help='Model name in the tables (default: from the heatmap directory)')
        return parser

    def config_overrides(self, args: argparse.Namespace) -> Dict[str, Any]:
        evaluation = {'thresholds': args.thresholds, 'pooling': args.pooling}
        evaluation = {k: v for k, v in evaluation.items() if v is not None}
        return {'evaluation': evaluation} if evaluation else {}

    async def execute(self, args: argparse.Namespace, context: CommandContext) -> Dict[str, Any]:
        config = context.config
        if not args.manifest.is_file():
            raise MissingArtifactError('dataset', f"no test manifest at {args.manifest}")
        manifest = DatasetManifest.load(args.manifest)
        model = args.model or model_name_for(args.heatmaps)
        evaluator = Evaluator(config.evaluation, workers=config.workers, show_progress=context.show_progress)

        results, grid = await asyncio.to_thread(
            evaluator.evaluate, args.heatmaps, manifest, args.manifest.parent, model
        )
        args.out_dir.mkdir(parents=True, exist_ok=True)
        results_path = write_results(results, args.out_dir / RESULTS_FILE)
        grid_path = write_grid(grid, args.out_dir / GRID_FILE)
        return self._format_result(
            True, f"Scored {len(results)} heatmaps of {model} ({config.evaluation.pooling})",
            results=str(results_path), grid=str(grid_path),
            statistics={'images': len(results), 'cells': len(grid)}
        )
