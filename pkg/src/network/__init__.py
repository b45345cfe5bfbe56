"""Fingerprint network: model, pair sampling, training and tiled extraction."""

from .model import FingerprintNetConfig, FingerprintNet, make_model
from .losses import ContrastiveLoss, plane_distance
from .pairs import LabeledImage, PatchPair, sample_pairs, load_labeled_images
from .trainer import TrainState, pretrain_artifact_estimator, siamese_finetune, separation_score
from .checkpoint import save_checkpoint, load_checkpoint
from .extraction import Comprint, extract_comprint, save_comprint, load_comprint

__all__ = [
    'FingerprintNetConfig', 'FingerprintNet', 'make_model',
    'ContrastiveLoss', 'plane_distance',
    'LabeledImage', 'PatchPair', 'sample_pairs', 'load_labeled_images',
    'TrainState', 'pretrain_artifact_estimator', 'siamese_finetune', 'separation_score',
    'save_checkpoint', 'load_checkpoint',
    'Comprint', 'extract_comprint', 'save_comprint', 'load_comprint',
]
