"""Fingerprint CNN: a DnCNN-style stack of stride-1 convolutions."""

from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Union

import torch
import torch.nn as nn

from ..utils.error_handler import ConfigurationError

# Intensities enter the network divided by this constant
INTENSITY_SCALE = 255.0


@dataclass(frozen=True)
class FingerprintNetConfig:
    """Shape of the fingerprint network."""

    depth: int = 17
    width: int = 64
    kernel: int = 3
    residual_head: bool = True

    def __post_init__(self):
        if self.depth < 2:
            raise ConfigurationError(f"depth must be >= 2, got {self.depth}")
        if self.width < 1:
            raise ConfigurationError(f"width must be >= 1, got {self.width}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigurationError(f"kernel must be a positive odd size, got {self.kernel}")

    @property
    def receptive_field(self) -> int:
        return self.depth * (self.kernel - 1) + 1

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FingerprintNetConfig":
        return cls(**{k: data[k] for k in ('depth', 'width', 'kernel', 'residual_head') if k in data})


class FingerprintNet(nn.Module):
    """
    Conv+ReLU stem, (depth - 2) Conv+BatchNorm+ReLU blocks, Conv head.

    With `residual_head` the head output is the fingerprint (an artifact
    estimate); without it the input plane is added back, DnCNN style.
    """

    def __init__(self, config: FingerprintNetConfig):
        super().__init__()
        self.config = config
        k, w = config.kernel, config.width
        pad = k // 2

        layers: List[nn.Module] = [nn.Conv2d(1, w, k, padding=pad), nn.ReLU(inplace=True)]
        for _ in range(config.depth - 2):
            layers += [nn.Conv2d(w, w, k, padding=pad, bias=False), nn.BatchNorm2d(w), nn.ReLU(inplace=True)]
        layers.append(nn.Conv2d(w, 1, k, padding=pad))
        self.layers = nn.Sequential(*layers)
        self.training_stage = "initialized"

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.layers(x)
        if not self.config.residual_head:
            out = x + out
        return out

    def conv_blocks(self) -> List[List[nn.Module]]:
        """Modules grouped per convolution (conv plus its norm/activation)."""
        blocks: List[List[nn.Module]] = []
        for module in self.layers:
            if isinstance(module, nn.Conv2d):
                blocks.append([module])
            else:
                blocks[-1].append(module)
        return blocks

    def set_trainable_tail(self, layers: Union[str, int]) -> int:
        """
        Freeze all but the last `layers` convolutions ('all' unfreezes everything).

        Returns:
            Number of trainable parameters
        """
        blocks = self.conv_blocks()
        n_trainable = len(blocks) if layers == "all" else int(layers)
        if n_trainable < 1:
            raise ConfigurationError(f"trainable layer count must be >= 1, got {layers}")
        first_trainable = max(0, len(blocks) - n_trainable)
        for index, block in enumerate(blocks):
            for module in block:
                for param in module.parameters():
                    param.requires_grad = index >= first_trainable
        return sum(p.numel() for p in self.parameters() if p.requires_grad)


def make_model(config: FingerprintNetConfig, seed: int, device: str = "cpu") -> FingerprintNet:
    """
    Build a network with weights initialized from `seed`.

    The global torch RNG state is left untouched.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = FingerprintNet(config)
    return model.to(device).eval()


def to_tensor(pixels, device: str = "cpu") -> torch.Tensor:
    """uint8/float (H, W) or (N, H, W) array -> float tensor (N, 1, H, W) in [0, 1]."""
    tensor = torch.as_tensor(pixels, dtype=torch.float32, device=device) / INTENSITY_SCALE
    if tensor.ndim == 2:
        tensor = tensor.unsqueeze(0)
    return tensor.unsqueeze(1)
