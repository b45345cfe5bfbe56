"""Data models for comprint-lab."""

from .compression import (
    CompressionChain, TrainingRecipe, CompositeSpec, RECIPES, get_recipe,
    LEFT_QFS, RECOMPRESSION_QFS, VARIANTS
)
from .dataset import SourceImage, ManifestEntry, DatasetManifest
from .results import ConfusionCounts, MccCurve, ImageResult, GridCell, ResultGrid
from .run_record import RunRecord, StageRecord, StageStatus, STAGES
from .experiment_config import ExperimentConfig, PROFILE_PRESETS

__all__ = [
    'CompressionChain', 'TrainingRecipe', 'CompositeSpec', 'RECIPES', 'get_recipe',
    'LEFT_QFS', 'RECOMPRESSION_QFS', 'VARIANTS',
    'SourceImage', 'ManifestEntry', 'DatasetManifest',
    'ConfusionCounts', 'MccCurve', 'ImageResult', 'GridCell', 'ResultGrid',
    'RunRecord', 'StageRecord', 'StageStatus', 'STAGES',
    'ExperimentConfig', 'PROFILE_PRESETS',
]
