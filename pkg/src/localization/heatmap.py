"""Pixel-resolution heatmaps from fitted mixtures, and heatmap files."""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import matplotlib
import numpy as np
from PIL import Image
from scipy.ndimage import map_coordinates

from ..utils.error_handler import ValidationError
from .em import GaussianMixtureState
from .features import FeatureField

HEATMAP_CONVENTION = "log p(x|component 1) - log p(x|component 0)"
HEATMAP_COLORMAP = "RdBu_r"
PARAMS_SUFFIX = ".params.json"


@dataclass
class Heatmap:
    """Per-pixel score; larger means more like component 1."""

    values: np.ndarray
    source_id: str
    model_tag: str = ""
    convention: str = HEATMAP_CONVENTION

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValidationError(f"heatmap must be 2-D, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError(f"heatmap of '{self.source_id}' contains non-finite values")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def negated(self) -> "Heatmap":
        return Heatmap(values=-self.values, source_id=self.source_id,
                       model_tag=self.model_tag, convention=self.convention)


def upsample_grid(grid: np.ndarray, field: FeatureField, image_shape: Tuple[int, int]) -> np.ndarray:
    """
    Bilinear interpolation from window centres to every pixel.

    Pixels outside the hull of the centres take the nearest grid value.
    """
    gh, gw = grid.shape
    offset = (field.window - 1) / 2.0
    rows = np.clip((np.arange(image_shape[0]) - offset) / field.stride, 0, gh - 1)
    cols = np.clip((np.arange(image_shape[1]) - offset) / field.stride, 0, gw - 1)
    rr, cc = np.meshgrid(rows, cols, indexing='ij')
    return map_coordinates(grid, [rr, cc], order=1, mode='nearest')


def heatmap_from_responsibilities(
    state: GaussianMixtureState,
    field: FeatureField,
    image_shape: Optional[Tuple[int, int]] = None,
    source_id: str = "",
    model_tag: str = ""
) -> Heatmap:
    """
    Log-likelihood ratio of the two components per window, at pixel resolution.

    A degenerate state yields an all-zero heatmap.
    """
    image_shape = tuple(image_shape or field.image_shape)
    if field.dim != state.dim:
        raise ValidationError(f"state dimension {state.dim} does not match field dimension {field.dim}")
    if state.degenerate:
        return Heatmap(values=np.zeros(image_shape), source_id=source_id, model_tag=model_tag)
    grid = state.log_likelihood_ratio(field.flat()).reshape(field.grid_shape)
    values = upsample_grid(grid, field, image_shape)
    return Heatmap(values=values, source_id=source_id, model_tag=model_tag)


def to_color(values: np.ndarray) -> np.ndarray:
    """Diverging colormap, symmetric around zero, as uint8 RGB."""
    bound = float(np.abs(values).max())
    scaled = np.full(values.shape, 0.5) if bound == 0 else 0.5 + values / (2.0 * bound)
    rgba = matplotlib.colormaps[HEATMAP_COLORMAP](scaled)
    return (rgba[..., :3] * 255.0).round().astype(np.uint8)


def _npz_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path if path.suffix == '.npz' else path.with_name(path.name + '.npz')


def save_heatmap(heatmap: Heatmap, path: Union[str, Path], params: Optional[Dict[str, Any]] = None,
                 with_png: bool = True) -> Path:
    """Write `<path>.npz` (float32), `<path>.png` and `<path>.params.json`."""
    path = _npz_path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(path, values=heatmap.values.astype(np.float32), source_id=np.array(heatmap.source_id),
                        model_tag=np.array(heatmap.model_tag), convention=np.array(heatmap.convention))
    if with_png:
        Image.fromarray(to_color(heatmap.values), mode='RGB').save(path.with_suffix('.png'))
    sidecar = path.with_name(path.stem + PARAMS_SUFFIX)
    with open(sidecar, 'w', encoding='utf-8') as f:
        json.dump(params or {}, f, indent=2, sort_keys=True, default=str)
    return path


def load_heatmap(path: Union[str, Path]) -> Heatmap:
    with np.load(_npz_path(path)) as data:
        return Heatmap(values=data['values'].astype(np.float64), source_id=str(data['source_id']),
                       model_tag=str(data['model_tag']), convention=str(data['convention']))


def load_heatmap_params(path: Union[str, Path]) -> Dict[str, Any]:
    path = _npz_path(path)
    with open(path.with_name(path.stem + PARAMS_SUFFIX), 'r', encoding='utf-8') as f:
        return json.load(f)
