"""Qualitative trend checks over a result grid."""

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import yaml
from scipy.stats import spearmanr

from ..models.compression import LEFT_QFS, LOSSLESS_VARIANT, pair_label, variant_name
from ..models.results import ResultGrid
from ..utils.logging_config import get_logger

logger = get_logger(__name__)

HIGH_QF = "HighQF"
WIDE_QF = "WideQF"
HIGH_QF_REC = "HighQFRec"

HIGH_PAIR_LEFT_QFS = tuple(qf for qf in LEFT_QFS if qf >= 70)
ROBUST_REC_VARIANTS = tuple(variant_name(q) for q in (70, 80, 90, 95, 100))


class Verdict(Enum):
    PASS = "pass"
    FAIL = "fail"
    NOT_EVALUABLE = "not evaluable"
    PERMITTED = "permitted"


@dataclass
class ClaimResult:
    key: str
    description: str
    verdict: Verdict
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {'key': self.key, 'description': self.description,
                'verdict': self.verdict.value, 'details': self.details}


@dataclass
class TrendReport:
    claims: List[ClaimResult]

    def get(self, key: str) -> ClaimResult:
        for claim in self.claims:
            if claim.key == key:
                return claim
        raise KeyError(key)

    @property
    def failed(self) -> List[str]:
        return [c.key for c in self.claims if c.verdict is Verdict.FAIL]

    def to_dict(self) -> Dict[str, Any]:
        return {'claims': [c.to_dict() for c in self.claims], 'failed': self.failed}

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=False, allow_unicode=True)
        return path


def _cells(grid: ResultGrid, model: str, left_qfs: Sequence[int], variants: Sequence[str]) -> Optional[List[float]]:
    """All requested cell means, or None if any is missing."""
    values = [grid.mean(model, qf, v) for v in variants for qf in left_qfs]
    return None if any(v is None for v in values) else values


def _mean(values: List[float]) -> float:
    return math.fsum(values) / len(values)


def rank_correlation(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman correlation; 0 when either series is constant."""
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        rho = spearmanr(x, y).correlation
    return 0.0 if rho is None or math.isnan(rho) else float(rho)


def _rises_with_qf(grid: ResultGrid) -> ClaimResult:
    description = "mean best-MCC rises with the QF pair within each model (lossless)"
    per_model = {}
    for model in grid.models:
        series = _cells(grid, model, LEFT_QFS, [LOSSLESS_VARIANT])
        if series is not None:
            per_model[model] = rank_correlation(LEFT_QFS, series)
    if not per_model:
        return ClaimResult('rises_with_qf', description, Verdict.NOT_EVALUABLE,
                           {'reason': 'no model has all lossless QF pairs'})
    verdict = Verdict.PASS if all(rho > 0 for rho in per_model.values()) else Verdict.FAIL
    return ClaimResult('rises_with_qf', description, verdict, {'rank_correlation': per_model})


def _verdict(key: str, description: str, better: Tuple[str, Optional[List[float]]],
             worse: Tuple[str, Optional[List[float]]], strict: bool = False,
             cost_only: bool = False) -> ClaimResult:
    """Mean of `better` cells >= (or > when strict) mean of `worse` cells."""
    (name_a, a), (name_b, b) = better, worse
    if a is None or b is None:
        absent = [n for n, v in (better, worse) if v is None]
        return ClaimResult(key, description, Verdict.NOT_EVALUABLE, {"missing_cells": absent})
    mean_a, mean_b = _mean(a), _mean(b)
    details = {name_a: mean_a, name_b: mean_b}
    if mean_a > mean_b or (mean_a == mean_b and not strict):
        return ClaimResult(key, description, Verdict.PASS, details)
    return ClaimResult(key, description, Verdict.PERMITTED if cost_only else Verdict.FAIL, details)


def compare_trends(grid: ResultGrid) -> TrendReport:
    """
    Verdicts on the expected qualitative behaviour of the three models.

    Four claims, plus two strict spot checks used by the long-running
    regression suite. Missing cells make a claim "not evaluable"; the
    lossless cost of recompression training is reported as "permitted".
    """
    lossless = [LOSSLESS_VARIANT]
    claims = [
        _rises_with_qf(grid),
        _verdict('wide_not_better_high_pairs',
                 f"{WIDE_QF} does not beat {HIGH_QF} on QF pairs >= {pair_label(70)} (lossless)",
                 (HIGH_QF, _cells(grid, HIGH_QF, HIGH_PAIR_LEFT_QFS, lossless)),
                 (WIDE_QF, _cells(grid, WIDE_QF, HIGH_PAIR_LEFT_QFS, lossless))),
        _verdict('rec_robust',
                 f"{HIGH_QF_REC} >= {HIGH_QF} on recompressed variants with Rec. QF >= 70",
                 (HIGH_QF_REC, _cells(grid, HIGH_QF_REC, LEFT_QFS, ROBUST_REC_VARIANTS)),
                 (HIGH_QF, _cells(grid, HIGH_QF, LEFT_QFS, ROBUST_REC_VARIANTS))),
        _verdict('rec_lossless_cost',
                 f"{HIGH_QF_REC} below {HIGH_QF} on the lossless variant is a permitted cost",
                 (HIGH_QF_REC, _cells(grid, HIGH_QF_REC, LEFT_QFS, lossless)),
                 (HIGH_QF, _cells(grid, HIGH_QF, LEFT_QFS, lossless)), cost_only=True),
        _verdict('high_pair_beats_low_pair',
                 f"{HIGH_QF}: QF pair {pair_label(80)} beats {pair_label(20)} (lossless)",
                 (pair_label(80), _cells(grid, HIGH_QF, [80], lossless)),
                 (pair_label(20), _cells(grid, HIGH_QF, [20], lossless)), strict=True),
        _verdict('rec90_robust',
                 f"{HIGH_QF_REC} beats {HIGH_QF} on Rec. QF 90",
                 (HIGH_QF_REC, _cells(grid, HIGH_QF_REC, LEFT_QFS, [variant_name(90)])),
                 (HIGH_QF, _cells(grid, HIGH_QF, LEFT_QFS, [variant_name(90)])), strict=True),
    ]
    for claim in claims:
        logger.info(f"trend {claim.key}: {claim.verdict.value}",
                    extra={'claim': claim.key, 'verdict': claim.verdict.value})
    return TrendReport(claims=claims)
