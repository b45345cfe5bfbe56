"""Evaluation result models: confusion counts, MCC curves and result grids."""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Tuple

from ..utils.error_handler import ValidationError
from .compression import LEFT_QFS, VARIANTS

GridKey = Tuple[str, int, str]


@dataclass(frozen=True)
class ConfusionCounts:
    """Pixel tallies of a binary prediction against a mask."""

    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        for name in ('tp', 'tn', 'fp', 'fn'):
            value = getattr(self, name)
            if value < 0:
                raise ValidationError(f"{name} cannot be negative, got {value}")
            object.__setattr__(self, name, int(value))

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def swapped(self) -> "ConfusionCounts":
        """Counts with the positive and negative classes exchanged."""
        return ConfusionCounts(tp=self.tn, tn=self.tp, fp=self.fn, fn=self.fp)

    def inverted(self) -> "ConfusionCounts":
        """Counts of the complemented prediction."""
        return ConfusionCounts(tp=self.fn, tn=self.fp, fp=self.tn, fn=self.tp)

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)

    def to_dict(self) -> Dict[str, int]:
        return {'tp': self.tp, 'tn': self.tn, 'fp': self.fp, 'fn': self.fn}


@dataclass
class MccCurve:
    """MCC as a function of threshold, with the best (threshold, polarity)."""

    thresholds: List[float]
    mcc_values: List[float]
    best_mcc: float
    best_threshold: float
    polarity: int
    negated_mcc_values: List[float] = field(default_factory=list)

    def __post_init__(self):
        if len(self.thresholds) != len(self.mcc_values):
            raise ValidationError("thresholds and mcc_values must have equal length")
        if self.negated_mcc_values and len(self.negated_mcc_values) != len(self.thresholds):
            raise ValidationError("negated_mcc_values must match thresholds in length")
        if self.polarity not in (1, -1):
            raise ValidationError(f"polarity must be +1 or -1, got {self.polarity}")
        if not -1.0 <= self.best_mcc <= 1.0:
            raise ValidationError(f"best_mcc out of range: {self.best_mcc}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'best_mcc': self.best_mcc,
            'best_threshold': self.best_threshold,
            'polarity': self.polarity,
            'n_thresholds': len(self.thresholds),
        }


@dataclass(frozen=True)
class ImageResult:
    """Best MCC of one heatmap, tagged with its model and composite."""

    model: str
    source_id: str
    left_qf: int
    variant: str
    best_mcc: float
    best_threshold: float = 0.0
    polarity: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown variant '{self.variant}'")
        if not -1.0 <= self.best_mcc <= 1.0:
            raise ValidationError(f"best_mcc out of range: {self.best_mcc}")

    @property
    def right_qf(self) -> int:
        return self.left_qf + 10

    @property
    def cell(self) -> GridKey:
        return (self.model, self.left_qf, self.variant)

    def to_row(self) -> Dict[str, Any]:
        return {
            'model': self.model,
            'source_id': self.source_id,
            'left_qf': self.left_qf,
            'right_qf': self.right_qf,
            'variant': self.variant,
            'best_mcc': self.best_mcc,
            'best_threshold': self.best_threshold,
            'polarity': self.polarity,
        }

    @classmethod
    def from_row(cls, row: Dict[str, Any]) -> "ImageResult":
        return cls(
            model=str(row['model']),
            source_id=str(row['source_id']),
            left_qf=int(row['left_qf']),
            variant=str(row['variant']),
            best_mcc=float(row['best_mcc']),
            best_threshold=float(row['best_threshold']),
            polarity=int(row['polarity']),
        )


@dataclass(frozen=True)
class GridCell:
    """Aggregate of one (model, left QF, variant) cell."""

    mean: float
    count: int
    std: float = 0.0

    def __post_init__(self):
        if self.count < 1:
            raise ValidationError("a grid cell needs at least one value")
        if not -1.0 <= self.mean <= 1.0:
            raise ValidationError(f"cell mean out of range: {self.mean}")


@dataclass
class ResultGrid:
    """
    Mean best-MCC per (model, left QF, variant).

    Absent cells stay absent: `get` returns None and `missing_cells` lists
    them, nothing is filled with zeros.
    """

    cells: Dict[GridKey, GridCell] = field(default_factory=dict)

    @property
    def models(self) -> List[str]:
        return sorted({key[0] for key in self.cells})

    @property
    def is_empty(self) -> bool:
        return not self.cells

    def get(self, model: str, left_qf: int, variant: str) -> Optional[GridCell]:
        return self.cells.get((model, left_qf, variant))

    def mean(self, model: str, left_qf: int, variant: str) -> Optional[float]:
        cell = self.get(model, left_qf, variant)
        return None if cell is None else cell.mean

    def has_variant(self, model: str, variant: str) -> bool:
        return any(k[0] == model and k[2] == variant for k in self.cells)

    def missing_cells(self, models: Optional[List[str]] = None) -> List[GridKey]:
        """Cells of the full grid (for `models`) without data."""
        models = models if models is not None else self.models
        return [
            (m, qf, v)
            for m in models for qf in LEFT_QFS for v in VARIANTS
            if (m, qf, v) not in self.cells
        ]

    def __iter__(self) -> Iterator[Tuple[GridKey, GridCell]]:
        return iter(sorted(self.cells.items(), key=lambda kv: (kv[0][0], kv[0][1], VARIANTS.index(kv[0][2]))))

    def __len__(self) -> int:
        return len(self.cells)

    def to_rows(self) -> List[Dict[str, Any]]:
        return [
            {'model': m, 'left_qf': qf, 'right_qf': qf + 10, 'variant': v,
             'mean_mcc': c.mean, 'count': c.count, 'std_mcc': c.std}
            for (m, qf, v), c in self
        ]

    @classmethod
    def from_rows(cls, rows: List[Dict[str, Any]]) -> "ResultGrid":
        cells = {
            (str(r['model']), int(r['left_qf']), str(r['variant'])):
                GridCell(mean=float(r['mean_mcc']), count=int(r['count']), std=float(r['std_mcc']))
            for r in rows
        }
        return cls(cells=cells)
