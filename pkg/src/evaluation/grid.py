"""Result-grid aggregation and the flat result tables."""

import math
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Tuple, Union

import pandas as pd

from ..models.results import GridCell, GridKey, ImageResult, ResultGrid
from ..utils.error_handler import ValidationError

RESULT_COLUMNS = ['model', 'source_id', 'left_qf', 'right_qf', 'variant', 'best_mcc', 'best_threshold', 'polarity']
GRID_COLUMNS = ['model', 'left_qf', 'right_qf', 'variant', 'mean_mcc', 'count', 'std_mcc']


def _cell_stats(values: List[float]) -> GridCell:
    count = len(values)
    mean = math.fsum(values) / count
    if count == 1:
        return GridCell(mean=mean, count=1, std=0.0)
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (count - 1))
    return GridCell(mean=max(-1.0, min(1.0, mean)), count=count, std=std)


def _group(results: Iterable[ImageResult]) -> Dict[GridKey, List[ImageResult]]:
    seen = set()
    groups: Dict[GridKey, List[ImageResult]] = defaultdict(list)
    for result in results:
        key = (result.model, result.source_id, result.left_qf, result.variant)
        if key in seen:
            raise ValidationError(f"duplicate result for {key}; refusing to double count")
        seen.add(key)
        groups[result.cell].append(result)
    return groups


def aggregate_grid(results: Iterable[ImageResult]) -> ResultGrid:
    """
    Mean, count and sample standard deviation of best-MCC per cell.

    Sums use math.fsum, so the grid does not depend on input order.
    """
    groups = _group(results)
    return ResultGrid(cells={
        cell: _cell_stats([r.best_mcc for r in members]) for cell, members in groups.items()
    })


def grid_from_pooled(pooled: Dict[GridKey, Tuple[float, int]]) -> ResultGrid:
    """Grid from one pooled MCC per cell: {cell: (mcc, image count)}."""
    return ResultGrid(cells={
        cell: GridCell(mean=value, count=count, std=0.0) for cell, (value, count) in pooled.items()
    })


def results_frame(results: Iterable[ImageResult]) -> pd.DataFrame:
    rows = sorted((r.to_row() for r in results),
                  key=lambda r: (r['model'], r['source_id'], r['left_qf'], r['variant']))
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def write_results(results: Iterable[ImageResult], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    results_frame(results).to_csv(path, index=False, float_format='%.17g')
    return path


def read_results(path: Union[str, Path]) -> List[ImageResult]:
    frame = pd.read_csv(path, dtype={'model': str, 'source_id': str, 'variant': str})
    missing = set(RESULT_COLUMNS) - set(frame.columns)
    if missing:
        raise ValidationError(f"{path} is missing columns: {', '.join(sorted(missing))}")
    return [ImageResult.from_row(row) for row in frame.to_dict(orient='records')]


def grid_frame(grid: ResultGrid) -> pd.DataFrame:
    return pd.DataFrame(grid.to_rows(), columns=GRID_COLUMNS)


def write_grid(grid: ResultGrid, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid_frame(grid).to_csv(path, index=False, float_format='%.17g')
    return path


def read_grid(path: Union[str, Path]) -> ResultGrid:
    frame = pd.read_csv(path, dtype={'model': str, 'variant': str})
    return ResultGrid.from_rows(frame.to_dict(orient='records'))
