"""Training/validation sets compressed according to a recipe."""

import random
from pathlib import Path
from typing import Union

from ..models.compression import CompressionChain, TrainingRecipe
from ..models.dataset import DatasetManifest, ManifestEntry
from ..utils.batch_processor import BatchProcessor
from ..utils.hashing import file_checksum, stable_seed
from ..utils.logging_config import get_logger
from .codec import compress_chain, write_bytes
from .corpus import load_source

logger = get_logger(__name__)


def training_manifest_name(recipe: TrainingRecipe) -> str:
    return f"manifest_{recipe.key}.json"


def draw_chain(recipe: TrainingRecipe, seed: int, image_id: str) -> CompressionChain:
    """
    Draw the compression chain of one image.

    The generator is seeded from (seed, image id) only, so recipes sharing
    a first-QF set assign the same first QF to an image.
    """
    rng = random.Random(stable_seed(seed, image_id))
    first = rng.choice(recipe.first_qfs)
    recompress = rng.random() < recipe.recompression_probability
    if recompress and recipe.recompression_qfs:
        return CompressionChain(steps=(first, rng.choice(recipe.recompression_qfs)))
    return CompressionChain(steps=(first,))


def build_training_set(
    manifest: DatasetManifest,
    recipe: TrainingRecipe,
    seed: int,
    root: Union[str, Path],
    workers: int = 1,
    show_progress: bool = False
) -> DatasetManifest:
    """
    Compress every train/val source with a chain drawn from `recipe`.

    Outputs go to `<root>/<recipe>/<role>/<id>.jpg`; each entry keeps its
    chain as the pair label and the path of its pristine source as the
    artifact-target counterpart.

    Returns:
        Training manifest, also saved as `<root>/manifest_<recipe>.json`
    """
    recipe.validate()
    root = Path(root)
    sources = [e for e in manifest.entries if e.role in ('train', 'val')]

    def compress_one(entry: ManifestEntry) -> ManifestEntry:
        chain = draw_chain(recipe, seed, entry.image_id)
        _, data = compress_chain(load_source(root, entry), chain)
        rel = f"{recipe.key}/{entry.role}/{entry.image_id}.jpg"
        write_bytes(root / rel, data)
        return ManifestEntry(image_id=entry.image_id, role=entry.role, path=rel,
                             checksum=file_checksum(root / rel), chain=chain,
                             source_path=entry.path)

    processor = BatchProcessor(max_workers=workers, show_progress=show_progress)
    entries = processor.map(compress_one, sources, desc=f"compress {recipe.name}")
    result = DatasetManifest(seed=seed, recipe_name=recipe.name, entries=list(entries))
    result.save(root / training_manifest_name(recipe))

    recompressed = sum(1 for e in result.entries if e.chain and len(e.chain.steps) > 1)
    logger.info(f"Built {recipe.name} training set: {len(result.entries)} images, {recompressed} recompressed",
                extra={'recipe': recipe.name, 'seed': seed, 'manifest_hash': result.content_hash})
    return result
