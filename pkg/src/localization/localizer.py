"""Comprint-to-heatmap pipeline."""

from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..models.experiment_config import LocalizationSection
from ..network.extraction import Comprint, load_comprint
from ..utils.batch_processor import BatchProcessor
from ..utils.hashing import stable_seed
from ..utils.logging_config import get_logger
from .em import em_fit
from .features import build_feature_field
from .heatmap import Heatmap, heatmap_from_responsibilities, save_heatmap
from .quantizer import ResidualQuantizer, high_pass
from .reduction import reduce_dimension

logger = get_logger(__name__)


class Localizer:
    """
    Quantize, featurize, reduce and cluster one comprint at a time.

    Every image's EM restarts are seeded from (seed, source id), so results
    do not depend on processing order.
    """

    def __init__(self, section: Optional[LocalizationSection] = None, seed: int = 0, em_workers: int = 1):
        self.section = section or LocalizationSection()
        self.seed = seed
        self.em_workers = em_workers

    def localize(self, comprint: Comprint) -> Tuple[Heatmap, Dict[str, Any]]:
        """
        Returns:
            (heatmap, record of every parameter used)
        """
        s = self.section
        values = high_pass(comprint.values) if s.high_pass else comprint.values.astype(np.float64)
        # an offset far above the spread would clip every pixel to the same level
        offset = float(values.mean())
        values = values - offset
        quantizer = ResidualQuantizer.adaptive(values, truncation=s.truncation, scale=s.step_scale)
        quantized = quantizer.quantize(values)
        field = build_feature_field(quantized, s.window, s.stride, s.order, s.truncation)
        reduced = reduce_dimension(field, min(s.dim, field.dim))
        image_seed = stable_seed(self.seed, comprint.source_id)
        state = em_fit(reduced, max_iter=s.max_iter, tol=s.tol, seed=image_seed,
                       restarts=s.restarts, workers=self.em_workers)
        heatmap = heatmap_from_responsibilities(state, reduced, comprint.shape,
                                                source_id=comprint.source_id, model_tag=comprint.model_tag)
        params = {
            'localization': asdict(s),
            'seed': self.seed,
            'image_seed': image_seed,
            'residual_offset': offset,
            'quantization_step': quantizer.quantization_step,
            'feature_dim': field.dim,
            'grid': list(field.grid_shape),
            'projection': reduced.projection.to_dict() if reduced.projection else None,
            'em': state.to_dict(),
            'source_id': comprint.source_id,
            'model_tag': comprint.model_tag,
        }
        return heatmap, params

    def localize_file(self, path: Union[str, Path], out_dir: Union[str, Path]) -> Path:
        comprint = load_comprint(path)
        heatmap, params = self.localize(comprint)
        if params['em']['degenerate']:
            logger.warning(f"{comprint.source_id}: degenerate features, heatmap is constant")
        return save_heatmap(heatmap, Path(out_dir) / comprint.source_id, params)

    def localize_paths(
        self,
        paths: Sequence[Union[str, Path]],
        out_dir: Union[str, Path],
        workers: int = 1,
        show_progress: bool = False
    ) -> List[Path]:
        processor = BatchProcessor(max_workers=workers, show_progress=show_progress)
        return processor.map(lambda p: self.localize_file(p, out_dir), list(paths), desc="localize")


def comprint_files(path: Union[str, Path]) -> List[Path]:
    """A single comprint file, or every `.npz` in a directory, sorted."""
    path = Path(path)
    if path.is_dir():
        return sorted(path.glob('*.npz'))
    return [path]
