"""Shared fixtures: synthetic images, a tiny corpus and an isolated environment."""

from pathlib import Path
from typing import Callable, List

import numpy as np
import pytest
from PIL import Image
from scipy.ndimage import gaussian_filter

from src.config.config_manager import ENV_PREFIX, ConfigManager
from src.models.compression import LEFT_QFS, VARIANTS
from src.models.results import GridCell, ResultGrid


def smooth_pixels(seed: int, shape=(96, 96), sigma: float = 2.0) -> np.ndarray:
    """Natural-looking grayscale plane: low-pass filtered noise stretched to [0, 255]."""
    rng = np.random.default_rng(seed)
    field = gaussian_filter(rng.normal(size=shape), sigma=sigma)
    field = (field - field.min()) / (field.max() - field.min() + 1e-12)
    return np.clip(np.rint(20 + 215 * field), 0, 255).astype(np.uint8)


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch):
    """No COMPRINT_* variable from the developer's shell leaks into a test."""
    for name in list(ConfigManager.ENV_MAPPINGS) + ['CONFIG']:
        monkeypatch.delenv(f"{ENV_PREFIX}{name}", raising=False)


@pytest.fixture
def smooth_image() -> Callable[..., np.ndarray]:
    return smooth_pixels


@pytest.fixture
def make_corpus(tmp_path) -> Callable[..., Path]:
    """Write `n` synthetic photos (PNG, JPEG and one RGB) into a fresh directory."""

    def _make(n: int = 8, shape=(96, 96), name: str = "corpus", extra: List[str] = ()) -> Path:
        corpus = tmp_path / name
        corpus.mkdir()
        for i in range(n):
            pixels = smooth_pixels(100 + i, shape)
            if i % 3 == 0:
                Image.fromarray(pixels, mode='L').save(corpus / f"img_{i:02d}.png")
            elif i % 3 == 1:
                Image.fromarray(pixels, mode='L').save(corpus / f"img_{i:02d}.jpg", quality=98)
            else:
                rgb = np.stack([pixels, np.flipud(pixels), np.fliplr(pixels)], axis=-1)
                Image.fromarray(rgb, mode='RGB').save(corpus / f"img_{i:02d}.png")
        for filename in extra:
            (corpus / filename).write_bytes(b"not an image at all")
        return corpus

    return _make


@pytest.fixture
def full_grid() -> Callable[..., ResultGrid]:
    """Result grid with every (model, QF pair, variant) cell from a scoring function."""

    def _grid(score: Callable[[str, int, str], float], models=("HighQF", "WideQF", "HighQFRec")) -> ResultGrid:
        cells = {
            (m, qf, v): GridCell(mean=score(m, qf, v), count=5, std=0.05)
            for m in models for qf in LEFT_QFS for v in VARIANTS
        }
        return ResultGrid(cells=cells)

    return _grid
