"""Dataset command: corpus ingestion, training sets and the composite test suite."""

import argparse
import asyncio
from pathlib import Path
from typing import Any, Dict

from .base_command import BaseCommand, CommandContext
from ...forge.dataset_forge import DatasetForge
from ...models.compression import RECIPES
from ...utils.error_handler import ConfigurationError
from ...utils.logging_config import get_logger


class DatasetCommand(BaseCommand):
    """Build the datasets of an experiment."""

    def __init__(self):
        self.logger = get_logger(__name__)

    @property
    def name(self) -> str:
        return 'dataset'

    @property
    def description(self) -> str:
        return 'Build training sets from a corpus, or the composite test suite'

    def add_parser(self, subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
        """Add dataset command parser."""
        parser = self._create_parser(
            subparsers,
            epilog="""
Examples:
  comprint-lab dataset build --corpus ~/photos --recipe highqf --seed 1 --out data/
  comprint-lab dataset build --corpus ~/photos          # every configured recipe
  comprint-lab dataset test-suite --out data/
            """
        )
        actions = parser.add_subparsers(dest='dataset_action', metavar='ACTION', required=True)

        build = actions.add_parser('build', help='Ingest a corpus and build training sets')
        build.add_argument('--corpus', type=Path, help='Directory of pristine images (default: dataset.corpus)')
        build.add_argument(
            '--recipe',
            action='append',
            type=str.lower,
            choices=sorted(RECIPES),
            help='Training recipe; repeat for several (default: dataset.recipes)'
        )
        self._add_seed_argument(build)
        build.add_argument('--out', dest='out_dir', type=Path,
                           help='Dataset root (default: dataset/ of the run directory)')

        suite = actions.add_parser('test-suite', help='Build composites from the ingested test split')
        suite.add_argument('--out', dest='out_dir', type=Path,
                           help='Dataset root holding manifest_source.json')
        return parser

    def config_overrides(self, args: argparse.Namespace) -> Dict[str, Any]:
        dataset: Dict[str, Any] = {}
        if getattr(args, 'corpus', None):
            dataset['corpus'] = str(args.corpus)
        if getattr(args, 'recipe', None):
            dataset['recipes'] = list(dict.fromkeys(args.recipe))
        return {'dataset': dataset} if dataset else {}

    async def execute(self, args: argparse.Namespace, context: CommandContext) -> Dict[str, Any]:
        config = context.config
        root = args.out_dir or context.runner.store.stage_dir('dataset')
        forge = DatasetForge(root, config.seed, workers=config.workers, show_progress=context.show_progress)

        if args.dataset_action == 'test-suite':
            manifest = await asyncio.to_thread(forge.build_test_suite)
            return self._format_result(
                True, f"Built {len(manifest.entries)} test entries in {forge.root}",
                root=str(forge.root), entries=len(manifest.entries)
            )

        section = config.dataset
        if not section.corpus:
            raise ConfigurationError("no corpus given; pass --corpus or set dataset.corpus")

        def build() -> Dict[str, Any]:
            sources = forge.ingest(section.corpus, (section.train, section.val, section.test),
                                   (section.train_size, section.train_size),
                                   (section.test_size, section.test_size))
            counts = {'sources': sources.role_counts}
            for key in section.recipes:
                counts[key] = forge.build_training_set(key).role_counts
            return counts

        counts = await asyncio.to_thread(build)
        self.logger.info(f"Datasets built in {forge.root}", extra={'seed': config.seed, 'recipes': section.recipes})
        return self._format_result(
            True, f"Built {', '.join(section.recipes)} in {forge.root}",
            root=str(forge.root), seed=config.seed, statistics=counts
        )
