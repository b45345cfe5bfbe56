"""Versioned checkpoint files for the fingerprint network."""

import os
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import torch

from ..utils.error_handler import MissingArtifactError, ValidationError
from ..utils.logging_config import get_logger
from .model import INTENSITY_SCALE, FingerprintNet, FingerprintNetConfig

CHECKPOINT_FORMAT_VERSION = 1

logger = get_logger(__name__)


def save_checkpoint(
    model: FingerprintNet,
    path: Union[str, Path],
    stage: str,
    tag: str = "",
    extra: Optional[Dict[str, Any]] = None
) -> Path:
    """
    Write config, weights and normalization constants to `path`.

    Written to a temporary file first and then moved into place.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        'format_version': CHECKPOINT_FORMAT_VERSION,
        'config': model.config.to_dict(),
        'state_dict': {k: v.detach().cpu().clone() for k, v in model.state_dict().items()},
        'normalization': {'scale': INTENSITY_SCALE},
        'stage': stage,
        'tag': tag,
        'extra': dict(extra or {}),
    }
    temp_file = path.with_name(path.name + '.tmp')
    torch.save(payload, temp_file)
    os.replace(temp_file, path)
    logger.debug(f"Saved {stage} checkpoint to {path}")
    return path


def load_checkpoint(path: Union[str, Path], device: str = "cpu") -> Tuple[FingerprintNet, Dict[str, Any]]:
    """
    Load a checkpoint into a fresh network in eval mode.

    Returns:
        (model, metadata without the weights)
    """
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError('train', f"checkpoint not found: {path}")
    payload = torch.load(path, map_location=device, weights_only=True)
    version = payload.get('format_version')
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValidationError(f"unsupported checkpoint format {version} in {path}")
    scale = payload.get('normalization', {}).get('scale')
    if scale != INTENSITY_SCALE:
        raise ValidationError(f"checkpoint normalization scale {scale} differs from {INTENSITY_SCALE}")

    model = FingerprintNet(FingerprintNetConfig.from_dict(payload['config']))
    model.load_state_dict(payload['state_dict'])
    model.training_stage = payload.get('stage', 'unknown')
    model.to(device).eval()
    meta = {k: v for k, v in payload.items() if k != 'state_dict'}
    return model, meta
