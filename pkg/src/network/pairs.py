"""Labeled training images and seeded patch-pair sampling."""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..forge.codec import load_pixels
from ..models.compression import CompressionChain
from ..models.dataset import DatasetManifest
from ..utils.error_handler import DataError, ValidationError

JPEG_BLOCK = 8


@dataclass
class LabeledImage:
    """A compressed training image, its chain and (optionally) its original."""

    image_id: str
    pixels: np.ndarray
    chain: CompressionChain
    original: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.pixels.ndim != 2:
            raise ValidationError(f"'{self.image_id}': expected a 2-D plane")
        if self.original is not None and self.original.shape != self.pixels.shape:
            raise ValidationError(f"'{self.image_id}': original shape {self.original.shape} "
                                  f"differs from {self.pixels.shape}")


@dataclass
class PatchPair:
    """Two equal-size patches and whether their compression histories match."""

    patch_a: np.ndarray
    patch_b: np.ndarray
    same_compression: bool
    chain_a: CompressionChain
    chain_b: CompressionChain

    def __post_init__(self):
        if self.patch_a.shape != self.patch_b.shape:
            raise ValidationError("patches of a pair must have equal shape")
        if self.same_compression != (self.chain_a == self.chain_b):
            raise ValidationError("same_compression must equal chain equality")


def load_labeled_images(
    manifest: DatasetManifest,
    root: Union[str, Path],
    role: str,
    with_originals: bool = True
) -> List[LabeledImage]:
    """Load the entries of one role; originals come from each entry's source_path."""
    root = Path(root)
    images = []
    for entry in manifest.by_role(role):
        if entry.chain is None:
            raise DataError(f"entry '{entry.image_id}' has no compression chain")
        original = None
        if with_originals and entry.source_path and (root / entry.source_path).is_file():
            original = load_pixels(root / entry.source_path)
        images.append(LabeledImage(entry.image_id, load_pixels(root / entry.path), entry.chain, original))
    return images


def group_by_chain(images: Sequence[LabeledImage]) -> List[Tuple[CompressionChain, List[LabeledImage]]]:
    """Images grouped by exact chain, groups in a stable order."""
    groups: Dict[CompressionChain, List[LabeledImage]] = {}
    for image in images:
        groups.setdefault(image.chain, []).append(image)
    return sorted(groups.items(), key=lambda kv: (kv[0].steps, kv[0].final_lossless))


def _offsets(length: int, patch: int, align: bool) -> np.ndarray:
    step = JPEG_BLOCK if align else 1
    return np.arange(0, length - patch + 1, step)


def _crop(rng: np.random.Generator, image: LabeledImage, patch: int, align: bool) -> np.ndarray:
    h, w = image.pixels.shape
    top = int(rng.choice(_offsets(h, patch, align)))
    left = int(rng.choice(_offsets(w, patch, align)))
    return image.pixels[top:top + patch, left:left + patch]


def sample_pairs(
    train_set: Sequence[LabeledImage],
    batch_spec: Tuple[int, float],
    seed: int,
    patch_size: int = 48,
    align_to_grid: bool = True
) -> Iterator[PatchPair]:
    """
    Endless, seed-determined stream of patch pairs.

    Pairs come in batches of `pairs_per_batch`, each holding exactly
    round(pairs_per_batch * positive_fraction) positives in shuffled order.
    Positives take two patches from images with equal chains (possibly the
    same image); negatives take one patch from each of two distinct chains.

    Args:
        train_set: Images labeled with their chains
        batch_spec: (pairs_per_batch, positive_fraction)
        seed: Stream seed
        patch_size: Patch side length
        align_to_grid: Restrict offsets to multiples of the 8-pixel JPEG grid
    """
    pairs_per_batch, positive_fraction = batch_spec
    if pairs_per_batch < 1 or not 0.0 <= positive_fraction <= 1.0:
        raise ValidationError(f"invalid batch spec {batch_spec}")
    groups = group_by_chain(train_set)
    if len(groups) < 2:
        raise DataError(f"need at least two distinct compression chains to form negatives, found {len(groups)}")
    for image in train_set:
        if min(image.pixels.shape) < patch_size:
            raise DataError(f"image '{image.image_id}' {image.pixels.shape} is smaller than patch {patch_size}")

    n_positive = int(round(pairs_per_batch * positive_fraction))
    labels = np.array([True] * n_positive + [False] * (pairs_per_batch - n_positive))
    return _pair_stream(groups, labels, np.random.default_rng(seed), patch_size, align_to_grid)


def _pair_stream(
    groups: List[Tuple[CompressionChain, List[LabeledImage]]],
    labels: np.ndarray,
    rng: np.random.Generator,
    patch_size: int,
    align_to_grid: bool
) -> Iterator[PatchPair]:
    while True:
        for same in rng.permutation(labels):
            if same:
                _, members = groups[int(rng.integers(len(groups)))]
                a = members[int(rng.integers(len(members)))]
                b = members[int(rng.integers(len(members)))]
            else:
                i, j = rng.choice(len(groups), size=2, replace=False)
                _, members_a = groups[int(i)]
                _, members_b = groups[int(j)]
                a = members_a[int(rng.integers(len(members_a)))]
                b = members_b[int(rng.integers(len(members_b)))]
            yield PatchPair(
                patch_a=_crop(rng, a, patch_size, align_to_grid),
                patch_b=_crop(rng, b, patch_size, align_to_grid),
                same_compression=bool(same),
                chain_a=a.chain,
                chain_b=b.chain,
            )


def take(stream: Iterator[PatchPair], n: int) -> List[PatchPair]:
    return [next(stream) for _ in range(n)]
