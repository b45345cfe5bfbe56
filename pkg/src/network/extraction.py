"""Tiled full-image comprint extraction and comprint files."""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import torch
from PIL import Image

from ..models.dataset import SourceImage
from ..utils.error_handler import ValidationError
from .model import FingerprintNet, to_tensor


@dataclass
class Comprint:
    """Per-pixel compression fingerprint of one image."""

    values: np.ndarray
    source_id: str
    model_tag: str = ""

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValidationError(f"comprint must be 2-D, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError(f"comprint of '{self.source_id}' contains non-finite values")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape


def tile_starts(length: int, tile: int, overlap: int) -> Tuple[List[int], int]:
    """
    Tile origins along one axis and the padded length they cover.

    A side shorter than one tile is padded up to a single tile.

    Returns:
        (starts, padded_length) with the last tile ending at padded_length
    """
    step = tile - overlap
    if length <= tile:
        return [0], tile
    n_steps = -(-(length - tile) // step)
    return [i * step for i in range(n_steps + 1)], n_steps * step + tile


@torch.no_grad()
def extract_comprint(
    model: FingerprintNet,
    image: SourceImage,
    tile: int,
    overlap: int,
    model_tag: str = "",
    device: str = "cpu"
) -> Comprint:
    """
    Run the network over overlapping tiles and average the overlaps.

    The image is reflect-padded at the bottom/right so whole tiles cover
    it; tiles are processed independently and the padding is cropped away.
    A side shorter than the tile is padded up to it, which reflection
    allows only while the padding stays below the side length.

    Args:
        model: Fingerprint network (switched to eval mode)
        image: Grayscale source
        tile: Tile side length
        overlap: Overlap between neighbouring tiles
        model_tag: Recorded on the comprint

    Returns:
        Comprint with the image's shape

    Raises:
        ValidationError: tile larger than the reflect-padded image, or tile <= overlap
    """
    if not tile > overlap >= 0:
        raise ValidationError(f"need tile > overlap >= 0, got tile={tile} overlap={overlap}")
    height, width = image.pixels.shape
    rows, padded_h = tile_starts(height, tile, overlap)
    cols, padded_w = tile_starts(width, tile, overlap)
    pad_h, pad_w = padded_h - height, padded_w - width
    if pad_h >= height or pad_w >= width:
        raise ValidationError(
            f"tile {tile} is larger than the reflect-padded image {height}x{width} allows"
        )

    model.eval()
    plane = np.pad(image.pixels, ((0, pad_h), (0, pad_w)), mode='reflect')
    total = np.zeros(plane.shape, dtype=np.float64)
    count = np.zeros(plane.shape, dtype=np.float64)
    for top in rows:
        for left in cols:
            x = to_tensor(plane[top:top + tile, left:left + tile], device)
            out = model(x)[0, 0].cpu().numpy().astype(np.float64)
            total[top:top + tile, left:left + tile] += out
            count[top:top + tile, left:left + tile] += 1.0
    values = (total / count)[:height, :width].astype(np.float32)
    return Comprint(values=values, source_id=image.id, model_tag=model_tag)


def to_visualization(values: np.ndarray) -> np.ndarray:
    """Min-max scale a real plane to uint8."""
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        return np.full(values.shape, 128, dtype=np.uint8)
    return np.rint((values - lo) / (hi - lo) * 255.0).astype(np.uint8)


def _npz_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path if path.suffix == '.npz' else path.with_name(path.name + '.npz')


def save_comprint(comprint: Comprint, path: Union[str, Path], with_png: bool = True) -> Path:
    """Write `<path>.npz` (float32 values + ids) and optionally `<path>.png`."""
    path = _npz_path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(path, values=comprint.values.astype(np.float32),
                        source_id=np.array(comprint.source_id), model_tag=np.array(comprint.model_tag))
    if with_png:
        Image.fromarray(to_visualization(comprint.values), mode='L').save(path.with_suffix('.png'))
    return path


def load_comprint(path: Union[str, Path]) -> Comprint:
    with np.load(_npz_path(path)) as data:
        return Comprint(values=data['values'], source_id=str(data['source_id']), model_tag=str(data['model_tag']))
