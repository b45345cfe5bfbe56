"""Distances and losses on fingerprint planes."""

import torch
import torch.nn as nn

from ..utils.error_handler import ConfigurationError

# Keeps the gradient of the square root finite for identical planes
_DISTANCE_EPS = 1e-16


def plane_distance(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean squared difference per pair: (N, 1, H, W) x2 -> (N,)."""
    return (a - b).pow(2).flatten(1).mean(dim=1)


class ContrastiveLoss(nn.Module):
    """
    Pairwise contrastive loss on the RMS plane distance D = sqrt(mean squared difference).

    same=1 pairs contribute D^2, same=0 pairs contribute max(margin - D, 0)^2.
    Negatives stop contributing once their mean squared distance reaches margin^2.
    """

    def __init__(self, margin: float = 1.0):
        super().__init__()
        if margin <= 0:
            raise ConfigurationError(f"margin must be positive, got {margin}")
        self.margin = margin

    def forward(self, out_a: torch.Tensor, out_b: torch.Tensor, same: torch.Tensor) -> torch.Tensor:
        squared = plane_distance(out_a, out_b)
        rms = torch.sqrt(squared + _DISTANCE_EPS)
        same = same.to(squared.dtype)
        negative = torch.clamp(self.margin - rms, min=0.0).pow(2)
        return torch.mean(same * squared + (1.0 - same) * negative)
