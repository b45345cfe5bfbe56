"""Corpus discovery, preprocessing and seeded split ingestion."""

import random
import re
from collections import Counter
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from PIL import Image

from ..models.compression import CompressionChain
from ..models.dataset import DatasetManifest, ManifestEntry, SourceImage
from ..utils.batch_processor import BatchProcessor
from ..utils.error_handler import InsufficientImagesError, ValidationError
from ..utils.hashing import file_checksum
from ..utils.logging_config import get_logger
from .codec import load_pixels, png_encode, write_bytes

logger = get_logger(__name__)

IMAGE_EXTENSIONS = {'.png', '.jpg', '.jpeg', '.tif', '.tiff', '.bmp', '.ppm', '.pgm', '.webp'}
SOURCE_MANIFEST_NAME = "manifest_source.json"
SOURCE_RECIPE_NAME = "sources"


def find_images(corpus_dir: Union[str, Path]) -> List[Path]:
    """All candidate image files under `corpus_dir`, sorted by relative path."""
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise ValidationError(f"corpus directory not found: {corpus_dir}")
    return sorted(
        (p for p in corpus_dir.rglob('*') if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS),
        key=lambda p: p.relative_to(corpus_dir).as_posix()
    )


def _sanitize(text: str) -> str:
    text = re.sub(r'[^A-Za-z0-9-]+', '_', text).strip('_')
    return text or "image"


def assign_ids(paths: List[Path], corpus_dir: Path) -> Dict[Path, str]:
    """Stable ids from relative paths; the extension is kept only to break ties."""
    stems = {p: _sanitize(p.relative_to(corpus_dir).with_suffix('').as_posix()) for p in paths}
    counts = Counter(stems.values())
    return {
        p: stem if counts[stem] == 1 else _sanitize(p.relative_to(corpus_dir).as_posix())
        for p, stem in stems.items()
    }


def _to_luma(image: Image.Image) -> Image.Image:
    if image.mode == 'L':
        return image
    if image.mode in ('I', 'I;16', 'I;16B', 'I;16L', 'F'):
        values = np.asarray(image, dtype=np.float64)
        scale = 257.0 if values.max(initial=0) > 255 else 1.0
        return Image.fromarray(np.clip(np.rint(values / scale), 0, 255).astype(np.uint8), mode='L')
    if image.mode != 'RGB':
        image = image.convert('RGB')
    # ITU-R BT.601 luma
    return image.convert('L')


def preprocess(
    image: Image.Image,
    target_size: Tuple[int, int],
    image_id: str = "image",
    origin: str = ""
) -> SourceImage:
    """
    Convert to 8-bit grayscale and resize to `target_size` (h, w).

    Args:
        image: Decoded image in any Pillow mode
        target_size: Output (height, width)
        image_id: Id of the resulting SourceImage
        origin: Provenance prefix (usually the source path)

    Returns:
        SourceImage of exactly target_size
    """
    height, width = target_size
    if height <= 0 or width <= 0:
        raise ValidationError(f"target size must be positive, got {target_size}")
    gray = _to_luma(image)
    steps = ["gray:bt601"]
    if gray.size != (width, height):
        gray = gray.resize((width, height), resample=Image.BICUBIC)
        steps.append(f"resize:bicubic:{height}x{width}")
    pixels = np.array(gray, dtype=np.uint8)
    note = f"{origin} [{', '.join(steps)}]" if origin else ", ".join(steps)
    return SourceImage(id=image_id, pixels=pixels, origin=note)


def _decode_file(path: Path) -> Image.Image:
    with Image.open(path) as img:
        img.load()
        return img.copy()


def ingest_corpus(
    corpus_dir: Union[str, Path],
    split_sizes: Tuple[int, int, int],
    seed: int,
    out_dir: Union[str, Path],
    train_size: Tuple[int, int] = (200, 200),
    test_size: Tuple[int, int] = (1000, 1000),
    workers: int = 1,
    show_progress: bool = False
) -> DatasetManifest:
    """
    Draw disjoint train/val/test splits and write preprocessed sources.

    Candidates are shuffled with `random.Random(seed)` and decoded in that
    order; undecodable files are skipped with a warning and the next
    candidate takes their place, so the selection does not depend on the
    number of workers.

    Args:
        corpus_dir: Directory of raster images (searched recursively)
        split_sizes: (train, val, test) counts
        seed: Shuffle seed
        out_dir: Dataset root; sources go to `sources/<role>/<id>.png`
        train_size: (h, w) of train/val images
        test_size: (h, w) of test images
        workers: Decode/write threads

    Returns:
        Source manifest, also saved as `<out_dir>/manifest_source.json`
    """
    corpus_dir = Path(corpus_dir)
    out_dir = Path(out_dir)
    n_train, n_val, n_test = (int(n) for n in split_sizes)
    need = n_train + n_val + n_test

    candidates = find_images(corpus_dir)
    if len(candidates) < need:
        raise InsufficientImagesError(need, len(candidates))
    ids = assign_ids(candidates, corpus_dir)
    random.Random(seed).shuffle(candidates)

    processor = BatchProcessor(max_workers=workers, show_progress=show_progress)
    accepted: List[Tuple[Path, Image.Image]] = []
    position = 0
    while len(accepted) < need and position < len(candidates):
        batch = candidates[position:position + need - len(accepted)]
        position += len(batch)
        decoded = processor.map(_decode_file, batch, desc="decode", skip_errors=True,
                                item_name=lambda p: p.name)
        for path, img in zip(batch, decoded):
            if img is None:
                logger.warning(f"Skipping undecodable image: {path}")
                continue
            accepted.append((path, img))
    if len(accepted) < need:
        raise InsufficientImagesError(need, len(accepted))

    roles = ['train'] * n_train + ['val'] * n_val + ['test'] * n_test

    def write_source(item: Tuple[Tuple[Path, Image.Image], str]) -> ManifestEntry:
        (path, img), role = item
        size = test_size if role == 'test' else train_size
        source = preprocess(img, size, image_id=ids[path],
                            origin=path.relative_to(corpus_dir).as_posix())
        rel = f"sources/{role}/{source.id}.png"
        write_bytes(out_dir / rel, png_encode(source.pixels))
        return ManifestEntry(image_id=source.id, role=role, path=rel,
                             checksum=file_checksum(out_dir / rel),
                             chain=CompressionChain.pristine(),
                             source_path=source.origin)

    entries = processor.map(write_source, list(zip(accepted, roles)), desc="preprocess")
    manifest = DatasetManifest(seed=seed, recipe_name=SOURCE_RECIPE_NAME, entries=list(entries))
    manifest.save(out_dir / SOURCE_MANIFEST_NAME)
    logger.info(f"Ingested {need} images ({n_train}/{n_val}/{n_test}) from {corpus_dir}",
                extra={'seed': seed, 'manifest_hash': manifest.content_hash})
    return manifest


def load_source(root: Union[str, Path], entry: ManifestEntry, origin: Optional[str] = None) -> SourceImage:
    """Load the preprocessed source plane of a manifest entry."""
    return SourceImage(id=entry.image_id, pixels=load_pixels(Path(root) / entry.path),
                       origin=origin or entry.path)


def load_image_file(path: Union[str, Path], image_id: Optional[str] = None) -> SourceImage:
    """Decode any image file to 8-bit luma at its native size."""
    path = Path(path)
    gray = _to_luma(_decode_file(path))
    return SourceImage(id=image_id or _sanitize(path.stem), pixels=np.array(gray, dtype=np.uint8),
                       origin=f"{path} [gray:bt601]")
