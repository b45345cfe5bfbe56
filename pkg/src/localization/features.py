"""Sliding-window co-occurrence feature field."""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..utils.error_handler import ValidationError
from .cooccurrence import run_codes, symmetry_classes


@dataclass
class PcaProjection:
    """Per-image principal-component projection (kept for reproducibility)."""

    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray

    @property
    def dim(self) -> int:
        return self.components.shape[1]

    def project(self, vectors: np.ndarray) -> np.ndarray:
        return (vectors - self.mean) @ self.components

    def to_dict(self):
        return {
            'dim': self.dim,
            'explained_variance': [float(v) for v in self.eigenvalues[:self.dim]],
            'discarded_variance': float(self.eigenvalues[self.dim:].sum()),
        }


@dataclass
class FeatureField:
    """
    One feature vector per sliding window.

    `vectors` has shape (grid_h, grid_w, D). Cell (i, j) covers the pixel
    window with origin (i * stride, j * stride) and side `window`.
    """

    vectors: np.ndarray
    window: int
    stride: int
    image_shape: Tuple[int, int]
    projection: Optional[PcaProjection] = None
    degenerate: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.vectors.ndim != 3:
            raise ValidationError(f"feature vectors must be (grid_h, grid_w, D), got {self.vectors.shape}")
        expected = grid_shape(self.image_shape, self.window, self.stride)
        if self.vectors.shape[:2] != expected:
            raise ValidationError(f"grid {self.vectors.shape[:2]} does not match geometry {expected}")

    @property
    def grid_shape(self) -> Tuple[int, int]:
        return self.vectors.shape[0], self.vectors.shape[1]

    @property
    def dim(self) -> int:
        return self.vectors.shape[2]

    def flat(self) -> np.ndarray:
        return self.vectors.reshape(-1, self.dim)

    def window_origin(self, i: int, j: int) -> Tuple[int, int]:
        return i * self.stride, j * self.stride

    def centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """Pixel coordinates of window centres along rows and columns."""
        offset = (self.window - 1) / 2.0
        gh, gw = self.grid_shape
        return np.arange(gh) * self.stride + offset, np.arange(gw) * self.stride + offset


def grid_shape(image_shape: Tuple[int, int], window: int, stride: int) -> Tuple[int, int]:
    if stride <= 0:
        raise ValidationError(f"stride must be positive, got {stride}")
    height, width = image_shape
    if window > height or window > width:
        raise ValidationError(f"window {window} does not fit a {height}x{width} plane")
    return (height - window) // stride + 1, (width - window) // stride + 1


def _window_sums(indicator: np.ndarray, rows: np.ndarray, cols: np.ndarray, size_r: int, size_c: int) -> np.ndarray:
    """Sum of `indicator` over the size_r x size_c box at each (rows x cols) origin."""
    integral = np.zeros((indicator.shape[0] + 1, indicator.shape[1] + 1), dtype=np.int64)
    integral[1:, 1:] = indicator.cumsum(axis=0, dtype=np.int64).cumsum(axis=1)
    r0, c0 = rows[:, None], cols[None, :]
    r1, c1 = r0 + size_r, c0 + size_c
    return integral[r1, c1] - integral[r0, c1] - integral[r1, c0] + integral[r0, c0]


def build_feature_field(
    quantized: np.ndarray,
    window: int,
    stride: int,
    order: int,
    truncation: int = 1
) -> FeatureField:
    """
    Folded, direction-merged, L1-normalized run histograms on a window grid.

    Per-class window counts come from integral images, so the cost does not
    grow with the window size.
    """
    if order < 2:
        raise ValidationError(f"order must be >= 2, got {order}")
    if window < order:
        raise ValidationError(f"window {window} is shorter than the run order {order}")
    gh, gw = grid_shape(quantized.shape, window, stride)
    class_index, n_classes = symmetry_classes(truncation, order)
    h_classes = class_index[run_codes(quantized, order, truncation, axis=1)]
    v_classes = class_index[run_codes(quantized, order, truncation, axis=0)]
    rows, cols = np.arange(gh) * stride, np.arange(gw) * stride
    span = window - order + 1

    counts = np.empty((gh, gw, n_classes), dtype=np.float64)
    for c in range(n_classes):
        counts[:, :, c] = (_window_sums(h_classes == c, rows, cols, window, span)
                           + _window_sums(v_classes == c, rows, cols, span, window))
    counts /= 2.0 * window * span
    return FeatureField(
        vectors=counts, window=window, stride=stride, image_shape=tuple(quantized.shape),
        params={'order': order, 'truncation': truncation, 'classes': n_classes},
    )
