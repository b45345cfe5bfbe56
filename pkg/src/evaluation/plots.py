"""QF-pair curves and recompression matrices, each with a sidecar table."""

from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from matplotlib.figure import Figure
from matplotlib.patches import Rectangle

from ..models.compression import LEFT_QFS, LOSSLESS_VARIANT, VARIANTS, pair_label
from ..models.results import ResultGrid
from ..utils.error_handler import ConfigurationError, ValidationError
from ..utils.logging_config import get_logger

logger = get_logger(__name__)

PAIR_LABELS = [pair_label(qf) for qf in LEFT_QFS]
MISSING_COLOR = "#d9d9d9"


def _sidecar(frame: pd.DataFrame, png_path: Path) -> Path:
    csv_path = png_path.with_suffix('.csv')
    frame.to_csv(csv_path, float_format="%.17g")
    logger.info(f"Wrote {png_path.name} and {csv_path.name}", extra={"figure": str(png_path)})
    return csv_path


def qf_curve_table(grid: ResultGrid, variant: str = LOSSLESS_VARIANT,
                   models: Optional[List[str]] = None) -> pd.DataFrame:
    """Rows = models, columns = QF pairs, values = cell means (NaN where missing)."""
    models = models or [m for m in grid.models if grid.has_variant(m, variant)]
    data = [[grid.mean(m, qf, variant) for qf in LEFT_QFS] for m in models]
    return pd.DataFrame(data, index=pd.Index(models, name='model'), columns=PAIR_LABELS, dtype=float)


def plot_qf_curves(
    grid: ResultGrid,
    out_path: Union[str, Path],
    variant: str = LOSSLESS_VARIANT,
    models: Optional[List[str]] = None
) -> Tuple[Path, Path]:
    """
    One line per model of mean best-MCC over the 15 QF pairs.

    Returns:
        (figure path, sidecar CSV path)
    """
    if grid.is_empty:
        raise ValidationError("cannot plot an empty result grid")
    table = qf_curve_table(grid, variant, models)
    if table.empty:
        raise ValidationError(f"no model has results for variant '{variant}'")

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig = Figure(figsize=(9, 4.5))
    ax = fig.add_subplot(1, 1, 1)
    x = np.arange(len(PAIR_LABELS))
    for model, row in table.iterrows():
        ax.plot(x, row.to_numpy(), marker='o', label=model)
    ax.set_xticks(x)
    ax.set_xticklabels(PAIR_LABELS, rotation=45)
    ax.set_xlabel("QF pair (left/right)")
    ax.set_ylabel("mean best MCC")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    ax.legend()
    ax.set_title(f"Composite localization ({variant})")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    return out_path, _sidecar(table, out_path)


def recompression_table(grid: ResultGrid, model: str) -> pd.DataFrame:
    """Rows = variants (lossless, rec50 ... rec100), columns = QF pairs."""
    data = [[grid.mean(model, qf, v) for qf in LEFT_QFS] for v in VARIANTS]
    return pd.DataFrame(data, index=pd.Index(VARIANTS, name='variant'), columns=PAIR_LABELS, dtype=float)


def plot_recompression_matrix(grid: ResultGrid, model: str, out_path: Union[str, Path]) -> Tuple[Path, Path]:
    """
    8 x 15 matrix of mean best-MCC for one model.

    Cells without data are hatched and labelled "missing", never drawn as 0.

    Returns:
        (figure path, sidecar CSV path)
    """
    if model not in grid.models:
        known = ", ".join(grid.models) or "none"
        raise ConfigurationError(f"unknown model '{model}', known models: {known}")
    if not any(grid.has_variant(model, v) for v in VARIANTS if v != LOSSLESS_VARIANT):
        raise ValidationError(f"model '{model}' has no recompressed results")

    table = recompression_table(grid, model)
    values = table.to_numpy()
    missing = np.isnan(values)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig = Figure(figsize=(11, 4.5))
    ax = fig.add_subplot(1, 1, 1)
    ax.set_facecolor(MISSING_COLOR)
    image = ax.imshow(np.ma.masked_array(values, mask=missing), cmap='viridis',
                      vmin=min(0.0, float(np.nanmin(values))), vmax=1.0, aspect='auto')
    for (i, j), value in np.ndenumerate(values):
        if missing[i, j]:
            ax.add_patch(_missing_patch(j, i))
            ax.text(j, i, "missing", ha='center', va='center', fontsize=6)
        else:
            ax.text(j, i, f"{value:.2f}", ha='center', va='center', fontsize=7,
                    color='white' if value < 0.5 else 'black')
    ax.set_xticks(np.arange(len(PAIR_LABELS)))
    ax.set_xticklabels(PAIR_LABELS, rotation=45)
    ax.set_yticks(np.arange(len(VARIANTS)))
    ax.set_yticklabels([v if v == LOSSLESS_VARIANT else f"Rec. QF {v[3:]}" for v in VARIANTS])
    ax.set_xlabel("QF pair (left/right)")
    ax.set_title(f"{model}: mean best MCC after recompression")
    fig.colorbar(image, ax=ax)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    return out_path, _sidecar(table, out_path)


def _missing_patch(col: int, row: int) -> Rectangle:
    return Rectangle((col - 0.5, row - 0.5), 1, 1, fill=False, hatch='//', edgecolor='grey', linewidth=0)
