"""Resolved experiment configuration and stage hashing."""

from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Union

from ..utils.error_handler import ConfigurationError
from ..utils.hashing import content_hash
from .compression import get_recipe
from .run_record import STAGES

PROFILES = ('paper', 'desk')
POOLING_MODES = ('per-image', 'pooled')

# Overrides applied on top of the (desk) defaults
PROFILE_PRESETS: Dict[str, Dict[str, Any]] = {
    'desk': {},
    'paper': {
        'dataset': {'train': 1000, 'val': 100, 'test': 50, 'train_size': 200, 'test_size': 1000},
        'model': {
            'depth': 17, 'width': 64,
            'pretrain_epochs': 50, 'pretrain_batch': 16,
            'siamese_steps': 20000, 'eval_interval': 500, 'val_pairs': 1024,
        },
    },
}


@dataclass
class DatasetSection:
    corpus: Optional[str] = None
    train: int = 100
    val: int = 10
    test: int = 5
    train_size: int = 200
    test_size: int = 400
    recipes: List[str] = field(default_factory=lambda: ['highqf', 'wideqf', 'highqfrec'])

    def __post_init__(self):
        if min(self.train, self.val, self.test) < 0:
            raise ConfigurationError("dataset split sizes cannot be negative")
        if self.train_size < 1 or self.test_size < 1:
            raise ConfigurationError("dataset image sizes must be positive")
        if self.test_size % 2:
            raise ConfigurationError(f"dataset.test_size must be even for two-half composites, got {self.test_size}")
        if not self.recipes:
            raise ConfigurationError("dataset.recipes cannot be empty")
        self.recipes = [get_recipe(name).key for name in self.recipes]


@dataclass
class ModelSection:
    # Network
    depth: int = 8
    width: int = 32
    kernel: int = 3
    residual_head: bool = True
    device: str = "cpu"
    # Artifact pre-training
    pretrain_epochs: int = 5
    pretrain_lr: float = 1e-4
    pretrain_batch: int = 8
    patience: int = 5
    # Siamese fine-tuning
    siamese_steps: int = 300
    siamese_lr: float = 1e-5
    margin: float = 1.0
    patch_size: int = 48
    pairs_per_batch: int = 64
    positive_fraction: float = 0.5
    eval_interval: int = 50
    val_pairs: int = 256
    finetune_layers: Union[str, int] = "all"
    from_scratch: bool = False
    align_to_grid: bool = True
    # Tiled extraction
    tile: int = 200
    overlap: int = 32

    def __post_init__(self):
        if self.depth < 2 or self.width < 1 or self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigurationError(
                f"invalid network shape depth={self.depth} width={self.width} kernel={self.kernel}"
            )
        if self.margin <= 0:
            raise ConfigurationError(f"model.margin must be positive, got {self.margin}")
        if not 0.0 <= self.positive_fraction <= 1.0:
            raise ConfigurationError("model.positive_fraction must be in [0, 1]")
        if self.pretrain_epochs < 0 or self.siamese_steps < 0:
            raise ConfigurationError("training lengths cannot be negative")
        if self.pretrain_batch < 1 or self.pairs_per_batch < 1 or self.eval_interval < 1:
            raise ConfigurationError("batch sizes and eval_interval must be positive")
        if self.patch_size < 1:
            raise ConfigurationError("model.patch_size must be positive")
        if not 0 <= self.overlap < self.tile:
            raise ConfigurationError(f"need tile > overlap >= 0, got tile={self.tile} overlap={self.overlap}")
        if self.finetune_layers != "all" and (not isinstance(self.finetune_layers, int) or self.finetune_layers < 1):
            raise ConfigurationError("model.finetune_layers must be 'all' or a positive layer count")


@dataclass
class LocalizationSection:
    truncation: int = 1
    order: int = 4
    step_scale: float = 1.0
    high_pass: bool = False
    window: int = 128
    stride: int = 8
    dim: int = 25
    restarts: int = 10
    max_iter: int = 100
    tol: float = 1e-6

    def __post_init__(self):
        if self.truncation < 1:
            raise ConfigurationError("localization.truncation must be >= 1")
        if self.order < 2:
            raise ConfigurationError("localization.order must be >= 2")
        if self.step_scale <= 0:
            raise ConfigurationError("localization.step_scale must be positive")
        if self.window < self.order or self.stride < 1:
            raise ConfigurationError("localization.window must be >= order and stride >= 1")
        if self.dim < 1 or self.restarts < 1 or self.max_iter < 1:
            raise ConfigurationError("localization.dim, restarts and max_iter must be positive")


@dataclass
class EvaluationSection:
    thresholds: int = 256
    pooling: str = "per-image"
    exhaustive: bool = False

    def __post_init__(self):
        if self.thresholds < 2:
            raise ConfigurationError("evaluation.thresholds must be >= 2")
        if self.pooling not in POOLING_MODES:
            raise ConfigurationError(f"evaluation.pooling must be one of {POOLING_MODES}, got '{self.pooling}'")


_SECTIONS = {
    'dataset': DatasetSection,
    'model': ModelSection,
    'localization': LocalizationSection,
    'evaluation': EvaluationSection,
}
# Keys handled by the application shell, never part of a stage hash
_SHELL_KEYS = {'logging', 'runs_root', 'workers'}

_TRAIN_KEYS = (
    'depth', 'width', 'kernel', 'residual_head', 'device', 'pretrain_epochs', 'pretrain_lr',
    'pretrain_batch', 'patience', 'siamese_steps', 'siamese_lr', 'margin', 'patch_size',
    'pairs_per_batch', 'positive_fraction', 'eval_interval', 'val_pairs', 'finetune_layers',
    'from_scratch', 'align_to_grid',
)
_EXTRACT_KEYS = ('tile', 'overlap')


@dataclass
class ExperimentConfig:
    """Fully resolved configuration of one experiment."""

    profile: str = "desk"
    seed: int = 0
    runs_root: str = "runs"
    workers: int = 1
    dataset: DatasetSection = field(default_factory=DatasetSection)
    model: ModelSection = field(default_factory=ModelSection)
    localization: LocalizationSection = field(default_factory=LocalizationSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ConfigurationError(f"profile must be one of {PROFILES}, got '{self.profile}'")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """Build from a (merged) mapping; unknown keys are configuration errors."""
        known = {f.name for f in fields(cls)} | {'logging'}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {', '.join(unknown)}")

        kwargs: Dict[str, Any] = {}
        for name, section_cls in _SECTIONS.items():
            section_data = data.get(name) or {}
            allowed = {f.name for f in fields(section_cls)}
            bad = sorted(set(section_data) - allowed)
            if bad:
                raise ConfigurationError(f"unknown keys in '{name}': {', '.join(bad)}")
            try:
                kwargs[name] = section_cls(**section_data)
            except TypeError as e:
                raise ConfigurationError(f"invalid '{name}' section: {e}") from e
        for name in ('profile', 'seed', 'runs_root', 'workers'):
            if data.get(name) is not None:
                kwargs[name] = data[name]
        kwargs['seed'] = int(kwargs.get('seed', 0))
        kwargs['workers'] = int(kwargs.get('workers', 1))
        return cls(**kwargs)

    def _stage_payload(self, stage: str) -> Dict[str, Any]:
        model = asdict(self.model)
        if stage == 'dataset':
            return {'seed': self.seed, 'dataset': asdict(self.dataset)}
        if stage == 'train':
            return {'seed': self.seed, 'model': {k: model[k] for k in _TRAIN_KEYS}}
        if stage == 'extract':
            return {'model': {k: model[k] for k in _EXTRACT_KEYS}}
        if stage == 'localize':
            return {'seed': self.seed, 'localization': asdict(self.localization)}
        if stage == 'evaluate':
            return {'evaluation': asdict(self.evaluation)}
        if stage == 'plot':
            return {}
        raise ConfigurationError(f"unknown stage '{stage}', expected one of {', '.join(STAGES)}")

    def stage_hash(self, stage: str) -> str:
        """
        Hash of everything a stage's outputs depend on.

        Chains the upstream stage's hash, so a change propagates downstream
        and leaves upstream hashes untouched.
        """
        index = STAGES.index(stage) if stage in STAGES else -1
        payload = {'stage': stage, 'config': self._stage_payload(stage)}
        if index > 0:
            payload['upstream'] = self.stage_hash(STAGES[index - 1])
        return content_hash(payload)

    @property
    def config_hash(self) -> str:
        """Hash of every stage-relevant setting (shell keys excluded)."""
        data = {k: v for k, v in self.to_dict().items() if k not in _SHELL_KEYS}
        return content_hash(data)
