"""Two-half composite test images and the full test suite."""

from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..models.compression import LEFT_QFS, RECOMPRESSION_QFS, CompositeSpec, variant_name
from ..models.dataset import DatasetManifest, ManifestEntry, SourceImage
from ..utils.batch_processor import BatchProcessor
from ..utils.error_handler import ValidationError
from ..utils.hashing import file_checksum
from ..utils.logging_config import get_logger
from .codec import jpeg_encode, jpeg_roundtrip, load_pixels, png_encode, write_bytes
from .corpus import load_source

logger = get_logger(__name__)

TEST_MANIFEST_NAME = "manifest_test.json"
TEST_RECIPE_NAME = "test-suite"

# Mask values: left half (lower QF) is 0, right half is 1
LEFT_LABEL = 0
RIGHT_LABEL = 1


def composite_mask(shape: Tuple[int, int]) -> np.ndarray:
    height, width = shape
    if width % 2:
        raise ValidationError(f"composite width must be even, got {width}")
    mask = np.full((height, width), LEFT_LABEL, dtype=np.uint8)
    mask[:, width // 2:] = RIGHT_LABEL
    return mask


def splice_halves(source: SourceImage, left_qf: int, right_qf: int) -> np.ndarray:
    """
    Left half of the image coded at `left_qf`, right half at `right_qf`.

    Both halves come from whole-image round trips, so they share the
    8x8 block grid of the full frame.
    """
    height, width = source.pixels.shape
    if width % 2:
        raise ValidationError(f"composite width must be even, got {width} for '{source.id}'")
    left = jpeg_roundtrip(source.pixels, left_qf)
    right = jpeg_roundtrip(source.pixels, right_qf)
    half = width // 2
    return np.concatenate([left[:, :half], right[:, half:]], axis=1)


def encode_variant(image: np.ndarray, recompress_qf: Optional[int]) -> bytes:
    """PNG for the lossless variant, whole-image JPEG otherwise."""
    if recompress_qf is None:
        return png_encode(image)
    return jpeg_encode(image, recompress_qf)


def build_composite(left_src: SourceImage, spec: CompositeSpec) -> Tuple[np.ndarray, np.ndarray, Dict[str, bytes]]:
    """
    Build one composite and its saved variants.

    Returns:
        (composite plane, mask, files keyed by variant name): the lossless
        PNG always, plus the whole-image JPEG at `spec.recompress_qf` if set
    """
    if spec.source_id != left_src.id:
        raise ValidationError(f"spec is for '{spec.source_id}', got image '{left_src.id}'")
    image = splice_halves(left_src, spec.left_qf, spec.right_qf)
    mask = composite_mask(image.shape)
    files = {variant_name(None): encode_variant(image, None)}
    if spec.recompress_qf is not None:
        files[spec.variant] = encode_variant(image, spec.recompress_qf)
    return image, mask, files


def _file_suffix(recompress_qf: Optional[int]) -> str:
    return ".png" if recompress_qf is None else ".jpg"


def _composites_for_source(root: Path, entry: ManifestEntry) -> List[ManifestEntry]:
    source = load_source(root, entry)
    mask_rel = f"test/{source.id}/mask.png"
    write_bytes(root / mask_rel, png_encode(composite_mask(source.pixels.shape) * 255))

    entries: List[ManifestEntry] = []
    for left_qf in LEFT_QFS:
        image = splice_halves(source, left_qf, left_qf + 10)
        for recompress_qf in (None,) + RECOMPRESSION_QFS:
            spec = CompositeSpec(left_qf=left_qf, source_id=source.id, recompress_qf=recompress_qf)
            rel = f"test/{source.id}/q{left_qf}_{spec.variant}{_file_suffix(recompress_qf)}"
            write_bytes(root / rel, encode_variant(image, recompress_qf))
            entries.append(ManifestEntry(
                image_id=spec.entry_id, role='test', path=rel,
                checksum=file_checksum(root / rel), composite=spec,
                source_path=entry.path, mask_path=mask_rel,
            ))
    return entries


def build_test_suite(
    manifest: DatasetManifest,
    root: Union[str, Path],
    workers: int = 1,
    show_progress: bool = False
) -> DatasetManifest:
    """
    Every test source x 15 left QFs x 8 variants (lossless + 7 recompressions).

    Each composite is spliced once per left QF and encoded eight ways. Masks
    are stored once per source as 0/255 PNG (255 marks the right half).

    Returns:
        Test manifest, also saved as `<root>/manifest_test.json`
    """
    root = Path(root)
    sources = manifest.by_role('test')
    processor = BatchProcessor(max_workers=workers, show_progress=show_progress)
    per_source = processor.map(lambda e: _composites_for_source(root, e), sources, desc="composites")
    entries = [entry for group in per_source for entry in group]
    suite = DatasetManifest(seed=manifest.seed, recipe_name=TEST_RECIPE_NAME, entries=entries)
    suite.save(root / TEST_MANIFEST_NAME)
    logger.info(f"Built test suite: {len(sources)} sources, {len(entries)} composites",
                extra={'manifest_hash': suite.content_hash})
    return suite


def load_mask(path: Union[str, Path]) -> np.ndarray:
    """Read a stored mask as a 0/1 uint8 plane."""
    return (load_pixels(path) > 127).astype(np.uint8)
