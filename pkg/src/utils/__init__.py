"""Utility functions and classes."""

from .logging_config import get_logger, LogLevel, LoggingConfig, setup_application_logging
from .error_handler import (
    ErrorHandler, ComprintError, ConfigurationError, ValidationError,
    InsufficientImagesError, DataError, MissingArtifactError, TrainingDivergedError,
    get_error_handler
)
from .batch_processor import BatchProcessor, BatchMode
from .hashing import file_checksum, content_hash, stable_seed
from .performance_monitor import PerformanceMonitor, PerformanceContext

__all__ = [
    'get_logger',
    'LogLevel',
    'LoggingConfig',
    'setup_application_logging',
    'ErrorHandler',
    'ComprintError',
    'ConfigurationError',
    'ValidationError',
    'InsufficientImagesError',
    'DataError',
    'MissingArtifactError',
    'TrainingDivergedError',
    'get_error_handler',
    'BatchProcessor',
    'BatchMode',
    'file_checksum',
    'content_hash',
    'stable_seed',
    'PerformanceMonitor',
    'PerformanceContext',
]
