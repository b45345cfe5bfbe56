"""Per-image principal-component reduction of a feature field."""

from dataclasses import replace

import numpy as np

from ..utils.error_handler import ValidationError
from ..utils.logging_config import get_logger
from .features import FeatureField, PcaProjection

logger = get_logger(__name__)

# Total variance below this is treated as "all vectors equal"
DEGENERATE_VARIANCE = 1e-18


def reduce_dimension(field: FeatureField, d: int) -> FeatureField:
    """
    Project the field onto its top-`d` principal components.

    The covariance is the biased (1/N) sample covariance of this field's own
    vectors; eigenvectors are sorted by decreasing eigenvalue. A field with
    (numerically) zero variance comes back flagged `degenerate` with zero
    vectors.
    """
    vectors = field.flat()
    n, dim = vectors.shape
    if not 1 <= d <= dim:
        raise ValidationError(f"reduced dimension must be in [1, {dim}], got {d}")
    if n < d + 1:
        raise ValidationError(f"need at least {d + 1} vectors to fit {d} components, have {n}")

    mean = vectors.mean(axis=0)
    cov = np.cov(vectors, rowvar=False, bias=True).reshape(dim, dim)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    eigenvalues = np.clip(eigenvalues[::-1], 0.0, None)
    eigenvectors = eigenvectors[:, ::-1]
    projection = PcaProjection(mean=mean, components=eigenvectors[:, :d], eigenvalues=eigenvalues)

    degenerate = float(np.trace(cov)) <= DEGENERATE_VARIANCE
    if degenerate:
        logger.warning("feature field has zero variance; localization will be skipped")
        reduced = np.zeros((n, d))
    else:
        reduced = projection.project(vectors)
    return replace(
        field,
        vectors=reduced.reshape(field.grid_shape + (d,)),
        projection=projection,
        degenerate=degenerate,
    )
