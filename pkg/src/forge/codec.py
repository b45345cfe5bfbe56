"""Grayscale JPEG/PNG coding with pinned encoder settings."""

import io
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from PIL import Image

from ..models.compression import CompressionChain
from ..models.dataset import SourceImage
from ..utils.error_handler import ValidationError

# Baseline sequential JPEG, standard tables scaled by the libjpeg quality mapping
JPEG_SAVE_OPTIONS = {'optimize': False, 'progressive': False}
PNG_SAVE_OPTIONS = {'optimize': False, 'compress_level': 6}


def _as_image(pixels: np.ndarray) -> Image.Image:
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise ValidationError(f"expected a 2-D uint8 plane, got {pixels.dtype} {pixels.shape}")
    return Image.fromarray(pixels, mode='L')


def jpeg_encode(pixels: np.ndarray, quality: int) -> bytes:
    """Encode a grayscale plane as JPEG at the given quality factor."""
    if not 1 <= int(quality) <= 100:
        raise ValidationError(f"quality factor must be in [1, 100], got {quality}")
    buffer = io.BytesIO()
    _as_image(pixels).save(buffer, format='JPEG', quality=int(quality), **JPEG_SAVE_OPTIONS)
    return buffer.getvalue()


def png_encode(pixels: np.ndarray) -> bytes:
    """Encode a grayscale plane losslessly."""
    buffer = io.BytesIO()
    _as_image(pixels).save(buffer, format='PNG', **PNG_SAVE_OPTIONS)
    return buffer.getvalue()


def decode(data: bytes) -> np.ndarray:
    """Decode encoded bytes to a uint8 grayscale plane."""
    with Image.open(io.BytesIO(data)) as img:
        img.load()
        return np.array(img.convert('L'), dtype=np.uint8)


def jpeg_roundtrip(pixels: np.ndarray, quality: int) -> np.ndarray:
    return decode(jpeg_encode(pixels, quality))


def load_pixels(path: Union[str, Path]) -> np.ndarray:
    """Read a grayscale plane from disk."""
    with Image.open(path) as img:
        img.load()
        return np.array(img.convert('L'), dtype=np.uint8)


def write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)


def compress_chain(image: SourceImage, chain: CompressionChain) -> Tuple[np.ndarray, bytes]:
    """
    Apply a compression chain.

    Each JPEG step encodes the previous step's decoded plane. A lossless
    final save stores the last decoded plane as PNG.

    Returns:
        (final decoded plane, bytes of the final file)
    """
    # Chain QFs are validated on construction, before any encoding happens
    pixels = image.pixels
    data = b""
    for quality in chain.steps:
        data = jpeg_encode(pixels, quality)
        pixels = decode(data)
    if chain.final_lossless:
        data = png_encode(pixels)
    return pixels, data
