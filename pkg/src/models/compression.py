"""Compression history models: chains, training recipes and composite specs."""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from ..utils.error_handler import ConfigurationError, ValidationError

# Left-half QFs of the composite grid: 20, 25, ..., 90
LEFT_QFS: Tuple[int, ...] = tuple(range(20, 95, 5))
RIGHT_QF_OFFSET = 10
RECOMPRESSION_QFS: Tuple[int, ...] = (50, 60, 70, 80, 90, 95, 100)
LOSSLESS_VARIANT = "lossless"
VARIANTS: Tuple[str, ...] = (LOSSLESS_VARIANT,) + tuple(f"rec{q}" for q in RECOMPRESSION_QFS)


def _check_qf(qf: int) -> None:
    if isinstance(qf, bool) or not isinstance(qf, int):
        raise ValidationError(f"quality factor must be an integer, got {qf!r}")
    if not 1 <= qf <= 100:
        raise ValidationError(f"quality factor must be in [1, 100], got {qf}")


def variant_name(recompress_qf: Optional[int]) -> str:
    """'lossless' or 'rec<QF>'."""
    return LOSSLESS_VARIANT if recompress_qf is None else f"rec{recompress_qf}"


def parse_variant(variant: str) -> Optional[int]:
    """Inverse of `variant_name`."""
    if variant == LOSSLESS_VARIANT:
        return None
    if variant.startswith("rec") and variant[3:].isdigit():
        return int(variant[3:])
    raise ValidationError(f"unknown variant '{variant}', expected one of {', '.join(VARIANTS)}")


def pair_label(left_qf: int) -> str:
    """Axis label of a QF pair, e.g. '20/30'."""
    return f"{left_qf}/{left_qf + RIGHT_QF_OFFSET}"


@dataclass(frozen=True)
class CompressionChain:
    """
    Ordered JPEG quality factors applied to an image.

    Two chains are equal only if every step matches, so a chain that was
    recompressed never equals its single-step prefix.
    """

    steps: Tuple[int, ...] = ()
    final_lossless: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'steps', tuple(self.steps))
        for qf in self.steps:
            _check_qf(qf)
        if not self.steps and not self.final_lossless:
            raise ValidationError("a chain without JPEG steps must end with a lossless save")

    @classmethod
    def pristine(cls) -> "CompressionChain":
        return cls(steps=(), final_lossless=True)

    @property
    def is_pristine(self) -> bool:
        return not self.steps

    @property
    def label(self) -> str:
        """Compact text label, e.g. 'q70>q90' or 'pristine'."""
        if not self.steps:
            return "pristine"
        text = ">".join(f"q{qf}" for qf in self.steps)
        return f"{text}>png" if self.final_lossless else text

    def to_dict(self) -> Dict[str, Any]:
        return {'steps': list(self.steps), 'final_lossless': self.final_lossless}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CompressionChain":
        return cls(steps=tuple(int(q) for q in data.get('steps', [])),
                   final_lossless=bool(data.get('final_lossless', False)))

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class TrainingRecipe:
    """QF sets and recompression probability of one training-data version."""

    name: str
    first_qfs: Tuple[int, ...]
    recompression_qfs: Tuple[int, ...] = ()
    recompression_probability: float = 0.0

    def __post_init__(self):
        if not self.name:
            raise ValueError("recipe name cannot be empty")
        object.__setattr__(self, 'first_qfs', tuple(sorted(set(self.first_qfs))))
        object.__setattr__(self, 'recompression_qfs', tuple(sorted(set(self.recompression_qfs))))
        if not self.first_qfs:
            raise ConfigurationError(f"recipe '{self.name}' has no first-compression QFs")
        for qf in self.first_qfs + self.recompression_qfs:
            _check_qf(qf)
        if not 0.0 <= self.recompression_probability <= 1.0:
            raise ConfigurationError(
                f"recompression_probability must be in [0, 1], got {self.recompression_probability}"
            )

    def validate(self) -> None:
        """Raise ConfigurationError if the recipe cannot be sampled."""
        if self.recompression_probability > 0 and not self.recompression_qfs:
            raise ConfigurationError(
                f"recipe '{self.name}' recompresses with probability "
                f"{self.recompression_probability} but has no recompression QFs"
            )

    @property
    def key(self) -> str:
        return self.name.lower()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'first_qfs': list(self.first_qfs),
            'recompression_qfs': list(self.recompression_qfs),
            'recompression_probability': self.recompression_probability,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainingRecipe":
        return cls(
            name=data['name'],
            first_qfs=tuple(data['first_qfs']),
            recompression_qfs=tuple(data.get('recompression_qfs', ())),
            recompression_probability=float(data.get('recompression_probability', 0.0)),
        )


_HIGH_QFS = (50, 55, 60, 65, 70, 80, 90)

RECIPES: Dict[str, TrainingRecipe] = {
    'highqf': TrainingRecipe('HighQF', _HIGH_QFS),
    'wideqf': TrainingRecipe('WideQF', (20, 25, 30, 35, 40, 50, 60, 70, 80, 90)),
    'highqfrec': TrainingRecipe('HighQFRec', _HIGH_QFS, _HIGH_QFS, 0.5),
}


def get_recipe(name: str) -> TrainingRecipe:
    """Look up a recipe by case-insensitive name."""
    try:
        return RECIPES[name.lower()]
    except KeyError:
        known = ", ".join(r.name for r in RECIPES.values())
        raise ConfigurationError(f"unknown recipe '{name}', expected one of: {known}") from None


@dataclass(frozen=True)
class CompositeSpec:
    """
    One composite test image: left half at `left_qf`, right half ten QF
    higher, optionally recompressed as a whole at `recompress_qf`.
    """

    left_qf: int
    source_id: str
    recompress_qf: Optional[int] = None
    right_qf: int = field(init=False)

    def __post_init__(self):
        if self.left_qf not in LEFT_QFS:
            raise ValidationError(f"left_qf must be one of {list(LEFT_QFS)}, got {self.left_qf}")
        if self.recompress_qf is not None and self.recompress_qf not in RECOMPRESSION_QFS:
            raise ValidationError(
                f"recompress_qf must be one of {list(RECOMPRESSION_QFS)}, got {self.recompress_qf}"
            )
        if not self.source_id:
            raise ValidationError("source_id cannot be empty")
        object.__setattr__(self, 'right_qf', self.left_qf + RIGHT_QF_OFFSET)

    @property
    def variant(self) -> str:
        return variant_name(self.recompress_qf)

    @property
    def pair_label(self) -> str:
        return pair_label(self.left_qf)

    @property
    def entry_id(self) -> str:
        return f"{self.source_id}__q{self.left_qf}_{self.variant}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            'left_qf': self.left_qf,
            'right_qf': self.right_qf,
            'recompress_qf': self.recompress_qf,
            'source_id': self.source_id,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CompositeSpec":
        spec = cls(left_qf=int(data['left_qf']), source_id=data['source_id'],
                   recompress_qf=data.get('recompress_qf'))
        if 'right_qf' in data and int(data['right_qf']) != spec.right_qf:
            raise ValidationError(f"right_qf {data['right_qf']} inconsistent with left_qf {spec.left_qf}")
        return spec
