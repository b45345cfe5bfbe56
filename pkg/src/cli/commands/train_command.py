"""Train command: artifact pre-training and Siamese fine-tuning of one recipe."""

import argparse
import asyncio
from pathlib import Path
from typing import Any, Dict

from .base_command import BaseCommand, CommandContext
from ...forge.dataset_forge import DatasetForge
from ...models.compression import RECIPES, get_recipe
from ...network.workflow import train_recipe

_STAGES = {
    'pretrain': ('pretrain',),
    'siamese': ('siamese',),
    'all': ('pretrain', 'siamese'),
}


class TrainCommand(BaseCommand):
    """Train the fingerprint network on a recipe's training set."""

    @property
    def name(self) -> str:
        return 'train'

    @property
    def description(self) -> str:
        return 'Pre-train and/or fine-tune the fingerprint network'

    def add_parser(self, subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
        """Add train command parser."""
        parser = self._create_parser(
            subparsers,
            epilog="""
Examples:
  comprint-lab train pretrain --recipe highqf --config config/config.yaml
  comprint-lab train siamese --recipe highqf        # needs pretrain.pt in the output dir
  comprint-lab train all --recipe wideqf --dataset data/ --out models/wideqf
            """
        )
        parser.add_argument('stage', choices=sorted(_STAGES), help='Training stage to run')
        parser.add_argument('--recipe', required=True, type=str.lower, choices=sorted(RECIPES),
                            help='Training recipe whose dataset to use')
        parser.add_argument('--dataset', type=Path,
                            help='Dataset root (default: dataset/ of the run directory)')
        self._add_seed_argument(parser)
        parser.add_argument('--out', dest='out_dir', type=Path,
                            help='Checkpoint directory (default: train/<recipe>/ of the run directory)')
        return parser

    async def execute(self, args: argparse.Namespace, context: CommandContext) -> Dict[str, Any]:
        config = context.config
        recipe = get_recipe(args.recipe)
        store = context.runner.store
        forge = DatasetForge(args.dataset or store.stage_dir('dataset'), config.seed)
        out_dir = args.out_dir or store.stage_dir('train') / recipe.key
        manifest = forge.training_manifest(recipe)

        summary = await asyncio.to_thread(
            train_recipe, manifest, forge.root, config.model, config.seed, out_dir, _STAGES[args.stage]
        )
        return self._format_result(
            True, f"Trained {recipe.name} ({args.stage}) into {out_dir}",
            checkpoint_dir=str(out_dir), details=summary
        )
