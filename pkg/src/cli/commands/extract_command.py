"""Extract command: comprints of images with a trained checkpoint."""

import argparse
import asyncio
from pathlib import Path
from typing import Any, Dict

from .base_command import BaseCommand, CommandContext
from ...network.workflow import extract_images


class ExtractCommand(BaseCommand):
    """Run a trained network over an image or a directory of images."""

    @property
    def name(self) -> str:
        return 'extract'

    @property
    def description(self) -> str:
        return 'Extract comprints with a trained model'

    def add_parser(self, subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
        """Add extract command parser."""
        parser = self._create_parser(
            subparsers,
            epilog="""
Examples:
  comprint-lab extract --model runs/desk-1a2b/train/highqf/comprint.pt --in photo.jpg --out comprints/
  comprint-lab extract --model comprint.pt --in suspects/ --out comprints/
            """
        )
        parser.add_argument('--model', required=True, type=Path, help='Checkpoint file (comprint.pt)')
        parser.add_argument('--in', dest='source', required=True, type=Path, help='Image file or directory')
        parser.add_argument('--out', dest='out_dir', required=True, type=Path, help='Output directory')
        return parser

    async def execute(self, args: argparse.Namespace, context: CommandContext) -> Dict[str, Any]:
        section = context.config.model
        paths = await asyncio.to_thread(
            extract_images, args.model, args.source, args.out_dir,
            section.tile, section.overlap, context.config.workers, section.device, context.show_progress
        )
        return self._format_result(
            True, f"Extracted {len(paths)} comprints into {args.out_dir}",
            outputs=[str(p) for p in paths]
        )
