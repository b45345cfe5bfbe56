"""Dataset construction: corpus ingestion, compression recipes and composites."""

from .codec import compress_chain, jpeg_encode, png_encode, decode, load_pixels
from .corpus import ingest_corpus, preprocess, find_images
from .training_set import build_training_set, draw_chain
from .composites import build_composite, build_test_suite, composite_mask, load_mask
from .dataset_forge import DatasetForge

__all__ = [
    'compress_chain', 'jpeg_encode', 'png_encode', 'decode', 'load_pixels',
    'ingest_corpus', 'preprocess', 'find_images',
    'build_training_set', 'draw_chain',
    'build_composite', 'build_test_suite', 'composite_mask', 'load_mask',
    'DatasetForge',
]
