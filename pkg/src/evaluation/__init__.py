"""Max-MCC scoring, result grids, figures and trend verdicts."""

from .metrics import confusion_counts, mcc, max_mcc, pooled_max_mcc, candidate_thresholds
from .grid import aggregate_grid, write_results, read_results, write_grid, read_grid
from .evaluator import Evaluator
from .plots import plot_qf_curves, plot_recompression_matrix
from .trends import Verdict, ClaimResult, TrendReport, compare_trends

__all__ = [
    'confusion_counts', 'mcc', 'max_mcc', 'pooled_max_mcc', 'candidate_thresholds',
    'aggregate_grid', 'write_results', 'read_results', 'write_grid', 'read_grid',
    'Evaluator',
    'plot_qf_curves', 'plot_recompression_matrix',
    'Verdict', 'ClaimResult', 'TrendReport', 'compare_trends',
]
