"""Residual quantization: the front end of the co-occurrence features."""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from ..network.extraction import Comprint
from ..utils.error_handler import ValidationError


@dataclass(frozen=True)
class ResidualQuantizer:
    """Rounds x / step and clips to [-T, T]."""

    quantization_step: float
    truncation: int = 1

    def __post_init__(self):
        if not np.isfinite(self.quantization_step) or self.quantization_step <= 0:
            raise ValidationError(f"quantization_step must be positive, got {self.quantization_step}")
        if self.truncation < 1:
            raise ValidationError(f"truncation must be >= 1, got {self.truncation}")

    @property
    def levels(self) -> int:
        return 2 * self.truncation + 1

    @classmethod
    def adaptive(cls, values: np.ndarray, truncation: int = 1, scale: float = 1.0) -> "ResidualQuantizer":
        """Step = std(values) * scale, so one standard deviation maps to ~1 level."""
        std = float(np.std(values))
        step = std * scale if std > 0 else 1.0
        return cls(quantization_step=step, truncation=truncation)

    def quantize(self, values: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(values)):
            raise ValidationError("cannot quantize non-finite values")
        # np.rint rounds half to even, which keeps quantize(-x) == -quantize(x)
        q = np.rint(np.asarray(values, dtype=np.float64) / self.quantization_step)
        return np.clip(q, -self.truncation, self.truncation).astype(np.int8)


def high_pass(values: np.ndarray, size: int = 3) -> np.ndarray:
    """Subtract a local box mean."""
    values = np.asarray(values, dtype=np.float64)
    return values - uniform_filter(values, size=size, mode='reflect')


def quantize_residual(comprint: Comprint, q: ResidualQuantizer) -> np.ndarray:
    """Quantized comprint plane, int8 in [-T, T]."""
    return q.quantize(comprint.values)
