"""Scoring a directory of heatmaps against the test-suite masks."""

from collections import defaultdict
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..forge.composites import load_mask
from ..localization.heatmap import load_heatmap
from ..models.dataset import DatasetManifest, ManifestEntry
from ..models.experiment_config import EvaluationSection
from ..models.results import GridKey, ImageResult, ResultGrid
from ..utils.batch_processor import BatchProcessor
from ..utils.error_handler import MissingArtifactError
from ..utils.logging_config import get_logger
from .grid import aggregate_grid, grid_from_pooled
from .metrics import max_mcc, pooled_max_mcc

logger = get_logger(__name__)


class Evaluator:
    """
    Max-MCC scoring of one model's heatmaps.

    Per-image mode maximizes MCC per heatmap and averages per cell; pooled
    mode shares one threshold across all pixels of a cell.
    """

    def __init__(self, section: Optional[EvaluationSection] = None, workers: int = 1, show_progress: bool = False):
        self.section = section or EvaluationSection()
        self.workers = workers
        self.show_progress = show_progress

    def _pairs(self, heatmap_dir: Path, manifest: DatasetManifest) -> List[Tuple[ManifestEntry, Path]]:
        entries = [e for e in manifest.by_role('test') if e.composite is not None]
        pairs = [(e, heatmap_dir / f"{e.image_id}.npz") for e in entries]
        missing = [str(p) for _, p in pairs if not p.is_file()]
        if missing:
            raise MissingArtifactError('localize', f"{len(missing)} heatmaps missing, e.g. {missing[0]}")
        return pairs

    def evaluate(
        self,
        heatmap_dir: Union[str, Path],
        manifest: DatasetManifest,
        root: Union[str, Path],
        model: str
    ) -> Tuple[List[ImageResult], ResultGrid]:
        """
        Score every composite of `manifest` whose heatmap is in `heatmap_dir`.

        Returns:
            (per-image results, aggregated grid)
        """
        heatmap_dir, root = Path(heatmap_dir), Path(root)
        pairs = self._pairs(heatmap_dir, manifest)
        masks = lru_cache(maxsize=None)(lambda rel: load_mask(root / rel))
        n_thresholds, exhaustive = self.section.thresholds, self.section.exhaustive

        def score(pair: Tuple[ManifestEntry, Path]) -> ImageResult:
            entry, path = pair
            curve = max_mcc(load_heatmap(path), masks(entry.mask_path), n_thresholds, exhaustive)
            spec = entry.composite
            return ImageResult(model=model, source_id=spec.source_id, left_qf=spec.left_qf,
                               variant=spec.variant, best_mcc=curve.best_mcc,
                               best_threshold=curve.best_threshold, polarity=curve.polarity)

        processor = BatchProcessor(max_workers=self.workers, show_progress=self.show_progress)
        results = processor.map(score, pairs, desc=f"evaluate {model}", item_name=lambda p: p[0].image_id)

        if self.section.pooling == 'pooled':
            grid = self._pooled_grid(pairs, masks, model)
        else:
            grid = aggregate_grid(results)
        logger.info(f"Evaluated {len(results)} heatmaps for {model}",
                    extra={'model': model, 'pooling': self.section.pooling, 'cells': len(grid)})
        return results, grid

    def _pooled_grid(self, pairs, masks, model: str) -> ResultGrid:
        cells: Dict[GridKey, List[Tuple[ManifestEntry, Path]]] = defaultdict(list)
        for entry, path in pairs:
            cells[(model, entry.composite.left_qf, entry.composite.variant)].append((entry, path))
        pooled = {}
        for cell, members in cells.items():
            heatmaps = [load_heatmap(p).values for _, p in members]
            cell_masks: List[np.ndarray] = [masks(e.mask_path) for e, _ in members]
            curve = pooled_max_mcc(heatmaps, cell_masks, self.section.thresholds, self.section.exhaustive)
            pooled[cell] = (curve.best_mcc, len(members))
        return grid_from_pooled(pooled)
