"""Co-occurrence features, EM clustering and heatmaps."""

from .quantizer import ResidualQuantizer, quantize_residual, high_pass
from .cooccurrence import CooccurrenceHistogram, compute_cooccurrence, symmetry_classes, fold
from .features import FeatureField, PcaProjection, build_feature_field
from .reduction import reduce_dimension
from .em import GaussianMixtureState, em_fit
from .heatmap import Heatmap, heatmap_from_responsibilities, save_heatmap, load_heatmap
from .localizer import Localizer, comprint_files

__all__ = [
    'ResidualQuantizer', 'quantize_residual', 'high_pass',
    'CooccurrenceHistogram', 'compute_cooccurrence', 'symmetry_classes', 'fold',
    'FeatureField', 'PcaProjection', 'build_feature_field',
    'reduce_dimension',
    'GaussianMixtureState', 'em_fit',
    'Heatmap', 'heatmap_from_responsibilities', 'save_heatmap', 'load_heatmap',
    'Localizer', 'comprint_files',
]
