"""Co-occurrence histograms of quantized residual runs and their symmetry folding."""

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Tuple

import numpy as np

from ..utils.error_handler import ValidationError

HORIZONTAL = "horizontal"
VERTICAL = "vertical"


@dataclass
class CooccurrenceHistogram:
    """Counts of length-`order` runs, indexed by base-(2T+1) code."""

    order: int
    truncation: int
    bins: np.ndarray
    direction: str

    def __post_init__(self):
        if self.bins.shape != ((2 * self.truncation + 1) ** self.order,):
            raise ValidationError(f"bins must have {(2 * self.truncation + 1) ** self.order} entries")
        if np.any(self.bins < 0):
            raise ValidationError("histogram bins cannot be negative")
        if self.direction not in (HORIZONTAL, VERTICAL):
            raise ValidationError(f"unknown direction '{self.direction}'")

    @property
    def total(self) -> int:
        return int(self.bins.sum())


def run_codes(quantized: np.ndarray, order: int, truncation: int, axis: int) -> np.ndarray:
    """
    Base-(2T+1) code of every run of `order` consecutive values along `axis`.

    Codes read the run left-to-right (or top-to-bottom), most significant first.
    """
    if quantized.min(initial=0) < -truncation or quantized.max(initial=0) > truncation:
        raise ValidationError(f"quantized values must lie in [-{truncation}, {truncation}]")
    levels = 2 * truncation + 1
    shifted = quantized.astype(np.int64) + truncation
    length = shifted.shape[axis] - order + 1
    if length < 1:
        raise ValidationError(f"plane too small for runs of {order} along axis {axis}")
    codes = np.zeros(
        (shifted.shape[0], length) if axis == 1 else (length, shifted.shape[1]), dtype=np.int64
    )
    for k in range(order):
        part = shifted[:, k:k + length] if axis == 1 else shifted[k:k + length, :]
        codes = codes * levels + part
    return codes


def compute_cooccurrence(
    quantized: np.ndarray,
    window_origin: Tuple[int, int],
    window: int,
    order: int,
    truncation: int = 1
) -> Tuple[CooccurrenceHistogram, CooccurrenceHistogram]:
    """
    Horizontal and vertical run histograms inside one square window.

    Each direction counts window * (window - order + 1) runs.
    """
    if order < 2:
        raise ValidationError(f"order must be >= 2, got {order}")
    row, col = window_origin
    height, width = quantized.shape
    if row < 0 or col < 0 or window < order or row + window > height or col + window > width:
        raise ValidationError(
            f"window {window} at {window_origin} does not fit a {height}x{width} plane (order {order})"
        )
    patch = quantized[row:row + window, col:col + window]
    n_bins = (2 * truncation + 1) ** order
    hist = []
    for axis, direction in ((1, HORIZONTAL), (0, VERTICAL)):
        codes = run_codes(patch, order, truncation, axis)
        hist.append(CooccurrenceHistogram(order, truncation, np.bincount(codes.ravel(), minlength=n_bins), direction))
    return hist[0], hist[1]


def _encode(t: Tuple[int, ...], levels: int, truncation: int) -> int:
    code = 0
    for v in t:
        code = code * levels + (v + truncation)
    return code


@lru_cache(maxsize=None)
def symmetry_classes(truncation: int, order: int) -> Tuple[np.ndarray, int]:
    """
    Map every run code to its class under negation and reversal.

    A run, its negation, its reversal and its negated reversal share a
    class; classes are numbered by their smallest member code.

    Returns:
        (class index per code, number of classes)
    """
    levels = 2 * truncation + 1
    canonical = np.empty(levels ** order, dtype=np.int64)
    for t in product(range(-truncation, truncation + 1), repeat=order):
        neg = tuple(-v for v in t)
        orbit = (t, neg, t[::-1], neg[::-1])
        canonical[_encode(t, levels, truncation)] = min(_encode(o, levels, truncation) for o in orbit)
    _, class_index = np.unique(canonical, return_inverse=True)
    class_index = class_index.astype(np.int64)
    class_index.setflags(write=False)
    return class_index, int(class_index.max()) + 1


def fold(bins: np.ndarray, truncation: int, order: int) -> np.ndarray:
    """Sum histogram bins over symmetry classes."""
    class_index, n_classes = symmetry_classes(truncation, order)
    return np.bincount(class_index, weights=bins, minlength=n_classes)
