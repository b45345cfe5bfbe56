"""Localize command: heatmaps from comprints."""

import argparse
import asyncio
from pathlib import Path
from typing import Any, Dict

from .base_command import BaseCommand, CommandContext
from ...localization.localizer import Localizer, comprint_files
from ...utils.error_handler import MissingArtifactError


class LocalizeCommand(BaseCommand):
    """Turn comprints into forgery heatmaps."""

    @property
    def name(self) -> str:
        return 'localize'

    @property
    def description(self) -> str:
        return 'Compute heatmaps from comprints'

    def add_parser(self, subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
        """Add localize command parser."""
        parser = self._create_parser(
            subparsers,
            epilog="""
Examples:
  comprint-lab localize --comprint comprints/ --out heatmaps/
  comprint-lab localize --comprint comprints/photo.npz --out heatmaps/ --window 64 --stride 4 --dim 10
            """
        )
        parser.add_argument('--comprint', required=True, type=Path, help='Comprint .npz file or directory')
        parser.add_argument('--out', dest='out_dir', required=True, type=Path, help='Output directory')
        parser.add_argument('--window', type=int, help='Feature window size in pixels')
        parser.add_argument('--stride', type=int, help='Feature grid stride in pixels')
        parser.add_argument('--dim', type=int, help='Reduced feature dimension')
        self._add_seed_argument(parser)
        return parser

    def config_overrides(self, args: argparse.Namespace) -> Dict[str, Any]:
        localization = {'window': args.window, 'stride': args.stride, 'dim': args.dim}
        localization = {k: v for k, v in localization.items() if v is not None}
        return {'localization': localization} if localization else {}

    async def execute(self, args: argparse.Namespace, context: CommandContext) -> Dict[str, Any]:
        config = context.config
        files = comprint_files(args.comprint)
        if not files or not all(f.is_file() for f in files):
            raise MissingArtifactError('extract', f"no comprints at {args.comprint}")

        localizer = Localizer(config.localization, seed=config.seed)
        paths = await asyncio.to_thread(
            localizer.localize_paths, files, args.out_dir, config.workers, context.show_progress
        )
        return self._format_result(
            True, f"Wrote {len(paths)} heatmaps to {args.out_dir}",
            seed=config.seed, outputs=[str(p) for p in paths]
        )
