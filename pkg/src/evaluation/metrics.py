"""Matthews correlation of thresholded heatmaps against composite masks."""

import math
from typing import Sequence, Tuple, Union

import numpy as np

from ..localization.heatmap import Heatmap
from ..models.results import ConfusionCounts, MccCurve
from ..utils.error_handler import ValidationError

ArrayLike = Union[Heatmap, np.ndarray]


def _values(heatmap: ArrayLike) -> np.ndarray:
    return np.asarray(heatmap.values if isinstance(heatmap, Heatmap) else heatmap, dtype=np.float64)


def _check_pair(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    if values.shape != mask.shape:
        raise ValidationError(f"heatmap shape {values.shape} does not match mask shape {mask.shape}")
    return mask.astype(bool)


def confusion_counts(heatmap: ArrayLike, mask: np.ndarray, threshold: float, polarity: int = 1) -> ConfusionCounts:
    """
    Tally (polarity * heatmap >= threshold) against the mask.

    Mask value 1 is the positive ("forged") class.
    """
    if polarity not in (1, -1):
        raise ValidationError(f"polarity must be +1 or -1, got {polarity}")
    values = _values(heatmap)
    truth = _check_pair(values, mask)
    predicted = polarity * values >= threshold
    tp = int(np.count_nonzero(predicted & truth))
    fp = int(np.count_nonzero(predicted & ~truth))
    fn = int(np.count_nonzero(~predicted & truth))
    return ConfusionCounts(tp=tp, tn=truth.size - tp - fp - fn, fp=fp, fn=fn)


def mcc(counts: ConfusionCounts) -> float:
    """
    Matthews correlation coefficient in integer arithmetic.

    Zero when any marginal of the denominator is zero.
    """
    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    numerator = tp * tn - fp * fn
    denominator_sq = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denominator_sq == 0:
        return 0.0
    root = math.isqrt(denominator_sq)
    if root * root == denominator_sq:
        value = numerator / root
    else:
        value = numerator / math.sqrt(denominator_sq)
    return max(-1.0, min(1.0, value))


def _mcc_vector(tp: np.ndarray, tn: np.ndarray, fp: np.ndarray, fn: np.ndarray) -> np.ndarray:
    tp, tn, fp, fn = (a.astype(np.float64) for a in (tp, tn, fp, fn))
    # each pairwise product stays below 2**53 for images under ~9e7 pixels
    denominator = np.sqrt((tp + fp) * (tp + fn)) * np.sqrt((tn + fp) * (tn + fn))
    with np.errstate(divide='ignore', invalid='ignore'):
        values = np.where(denominator > 0, (tp * tn - fp * fn) / denominator, 0.0)
    return np.clip(values, -1.0, 1.0)


def candidate_thresholds(values: np.ndarray, n_thresholds: int, exhaustive: bool = False) -> np.ndarray:
    """
    Sorted threshold candidates, closed under negation.

    Quantiles of the values and of their negation at `n_thresholds` evenly
    spaced levels (or every distinct value when exhaustive), both signs,
    plus +-inf.
    """
    if exhaustive:
        base = np.unique(values)
    else:
        levels = np.linspace(0.0, 1.0, n_thresholds)
        base = np.concatenate([np.quantile(values, levels), -np.quantile(-values, levels)])
    return np.unique(np.concatenate([base, -base, [-np.inf, np.inf]]))


def _sweep(values: np.ndarray, truth: np.ndarray, thresholds: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """MCC at every threshold for both polarities, via sorted-value counting."""
    all_sorted = np.sort(values)
    pos_sorted = np.sort(values[truth])
    n_total, n_pos = values.size, pos_sorted.size
    n_neg = n_total - n_pos

    # polarity +1: predicted positive where value >= t
    predicted = n_total - np.searchsorted(all_sorted, thresholds, side='left')
    tp = n_pos - np.searchsorted(pos_sorted, thresholds, side='left')
    fp = predicted - tp
    forward = _mcc_vector(tp, n_neg - fp, fp, n_pos - tp)

    # polarity -1: predicted positive where -value >= t, i.e. value <= -t
    predicted = np.searchsorted(all_sorted, -thresholds, side='right')
    tp = np.searchsorted(pos_sorted, -thresholds, side='right')
    fp = predicted - tp
    backward = _mcc_vector(tp, n_neg - fp, fp, n_pos - tp)
    return forward, backward


def max_mcc(heatmap: ArrayLike, mask: np.ndarray, n_thresholds: int = 256, exhaustive: bool = False) -> MccCurve:
    """
    Best MCC over thresholds and both polarities.

    Args:
        heatmap: Heatmap or 2-D array
        mask: Binary mask of the same shape
        n_thresholds: Quantile levels per sign
        exhaustive: Sweep every distinct heatmap value instead

    Returns:
        Full curve plus the best (mcc, threshold, polarity); a constant
        heatmap scores 0
    """
    if n_thresholds < 2:
        raise ValidationError(f"n_thresholds must be >= 2, got {n_thresholds}")
    values = _values(heatmap)
    truth = _check_pair(values, mask)
    if not np.all(np.isfinite(values)):
        raise ValidationError("heatmap contains non-finite values")
    values, truth = values.ravel(), truth.ravel()

    thresholds = candidate_thresholds(values, n_thresholds, exhaustive)
    forward, backward = _sweep(values, truth, thresholds)
    best_fwd, best_bwd = int(np.argmax(forward)), int(np.argmax(backward))
    if forward[best_fwd] >= backward[best_bwd]:
        best, threshold, polarity = forward[best_fwd], thresholds[best_fwd], 1
    else:
        best, threshold, polarity = backward[best_bwd], thresholds[best_bwd], -1
    return MccCurve(
        thresholds=thresholds.tolist(),
        mcc_values=forward.tolist(),
        best_mcc=float(best),
        best_threshold=float(threshold),
        polarity=polarity,
        negated_mcc_values=backward.tolist(),
    )


def pooled_max_mcc(
    heatmaps: Sequence[ArrayLike],
    masks: Sequence[np.ndarray],
    n_thresholds: int = 256,
    exhaustive: bool = False
) -> MccCurve:
    """One threshold and polarity shared by the pixels of all images."""
    if len(heatmaps) != len(masks) or not heatmaps:
        raise ValidationError("pooled scoring needs matching, non-empty heatmap and mask lists")
    for h, m in zip(heatmaps, masks):
        _check_pair(_values(h), m)
    values = np.concatenate([_values(h).ravel() for h in heatmaps])
    truth = np.concatenate([np.asarray(m).ravel() for m in masks])
    return max_mcc(values, truth, n_thresholds, exhaustive)
