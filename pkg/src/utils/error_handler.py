"""Error hierarchy, classification and exit-code mapping."""

import hashlib
import itertools
import logging
import threading
import traceback
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Type

from .logging_config import get_logger

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIGURATION = 1
EXIT_MISSING_ARTIFACT = 2
EXIT_RUNTIME = 3


class ComprintError(Exception):
    """Base exception for comprint-lab errors."""

    exit_code = EXIT_RUNTIME

    def details(self) -> Dict[str, Any]:
        """Structured fields for logs and error reports."""
        return {}


class ConfigurationError(ComprintError, ValueError):
    """Invalid configuration, unknown recipe or model name, or a stale cache without --force."""

    exit_code = EXIT_CONFIGURATION


class ValidationError(ComprintError, ValueError):
    """Data that violates a documented invariant (shapes, ranges, duplicates)."""

    exit_code = EXIT_CONFIGURATION


class InsufficientImagesError(ValidationError):
    """A corpus cannot fill the requested splits."""

    def __init__(self, need: int, have: int):
        self.need = need
        self.have = have
        super().__init__(f"insufficient images: need {need}, have {have}")

    def details(self) -> Dict[str, Any]:
        return {'need': self.need, 'have': self.have}


class DataError(ComprintError):
    """Training data cannot serve the request (no originals, a single chain)."""


class MissingArtifactError(ComprintError):
    """An upstream stage has not produced its outputs."""

    exit_code = EXIT_MISSING_ARTIFACT

    def __init__(self, stage: str, detail: str = ""):
        self.stage = stage
        message = f"run '{stage}' first"
        super().__init__(f"{message} ({detail})" if detail else message)

    def details(self) -> Dict[str, Any]:
        return {'missing_stage': self.stage}


class TrainingDivergedError(ComprintError):
    """A training or validation loss became NaN or infinite."""

    def __init__(self, message: str, stage: Optional[str] = None, where: Optional[str] = None,
                 last_finite_loss: Optional[float] = None):
        self.stage = stage
        self.where = where
        self.last_finite_loss = last_finite_loss
        super().__init__(message)

    def details(self) -> Dict[str, Any]:
        return {'training_stage': self.stage, 'where': self.where, 'last_finite_loss': self.last_finite_loss}


class ErrorSeverity(Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class ErrorCategory(Enum):
    CONFIGURATION = "configuration"
    VALIDATION = "validation"
    DATA = "data"
    DEPENDENCY = "dependency"
    TRAINING = "training"
    FILE_SYSTEM = "file_system"
    UNKNOWN = "unknown"


# First match wins, so subclasses precede their bases
_CATEGORY_BY_TYPE: Tuple[Tuple[Type[BaseException], ErrorCategory], ...] = (
    (ConfigurationError, ErrorCategory.CONFIGURATION),
    (MissingArtifactError, ErrorCategory.DEPENDENCY),
    (TrainingDivergedError, ErrorCategory.TRAINING),
    (DataError, ErrorCategory.DATA),
    (ValidationError, ErrorCategory.VALIDATION),
    (OSError, ErrorCategory.FILE_SYSTEM),
    (ValueError, ErrorCategory.VALIDATION),
)

_SEVERITY_BY_CATEGORY: Dict[ErrorCategory, ErrorSeverity] = {
    ErrorCategory.TRAINING: ErrorSeverity.CRITICAL,
    ErrorCategory.UNKNOWN: ErrorSeverity.CRITICAL,
    ErrorCategory.CONFIGURATION: ErrorSeverity.HIGH,
    ErrorCategory.DEPENDENCY: ErrorSeverity.HIGH,
    ErrorCategory.DATA: ErrorSeverity.MEDIUM,
    ErrorCategory.FILE_SYSTEM: ErrorSeverity.MEDIUM,
    ErrorCategory.VALIDATION: ErrorSeverity.LOW,
}

_LOG_LEVEL_BY_SEVERITY: Dict[ErrorSeverity, int] = {
    ErrorSeverity.LOW: logging.WARNING,
    ErrorSeverity.MEDIUM: logging.ERROR,
    ErrorSeverity.HIGH: logging.ERROR,
    ErrorSeverity.CRITICAL: logging.CRITICAL,
}


@dataclass
class ErrorInfo:
    """One recorded error."""

    error_id: str
    timestamp: datetime
    exception: BaseException
    category: ErrorCategory
    severity: ErrorSeverity
    context: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'error_id': self.error_id,
            'timestamp': self.timestamp.isoformat(),
            'exception_type': type(self.exception).__name__,
            'exception_message': str(self.exception),
            'category': self.category.value,
            'severity': self.severity.value,
            'context': self.context,
        }


class ErrorHandler:
    """
    Classifies, logs and counts errors.

    Stage failures reach it from the CLI, per-image failures from
    `BatchProcessor` in skip mode. The history is bounded.
    """

    def __init__(self, max_error_history: int = 1000, error_reporting_enabled: bool = True):
        self.max_error_history = max_error_history
        self.error_reporting_enabled = error_reporting_enabled
        self.logger = get_logger(__name__)
        self.error_history: List[ErrorInfo] = []
        self.error_counts: Dict[str, int] = {}
        self.total_errors = 0
        self._sequence = itertools.count()
        # handle_error is called from BatchProcessor worker threads
        self._lock = threading.Lock()

    def handle_error(
        self,
        exception: BaseException,
        context: Optional[Dict[str, Any]] = None,
        category: Optional[ErrorCategory] = None,
        severity: Optional[ErrorSeverity] = None
    ) -> ErrorInfo:
        """
        Record an error; category and severity are derived from its type when omitted.

        The exception's own `details()` are merged into the context.
        """
        category = category or self.classify(exception)
        merged = dict(context or {})
        if isinstance(exception, ComprintError):
            merged.update(exception.details())
        info = ErrorInfo(
            error_id=self._error_id(exception),
            timestamp=datetime.now(),
            exception=exception,
            category=category,
            severity=severity or _SEVERITY_BY_CATEGORY[category],
            context=merged,
        )

        name = type(exception).__name__
        with self._lock:
            self.total_errors += 1
            self.error_counts[name] = self.error_counts.get(name, 0) + 1
            self.error_history.append(info)
            del self.error_history[:-self.max_error_history]
        if self.error_reporting_enabled:
            self._log_error(info)
        return info

    @staticmethod
    def classify(exception: BaseException) -> ErrorCategory:
        for exception_type, category in _CATEGORY_BY_TYPE:
            if isinstance(exception, exception_type):
                return category
        return ErrorCategory.UNKNOWN

    @staticmethod
    def exit_code_for(exception: BaseException) -> int:
        """1 for configuration and validation, 2 for a missing upstream stage, 3 otherwise."""
        return getattr(exception, 'exit_code', EXIT_RUNTIME)

    def _error_id(self, exception: BaseException) -> str:
        key = f"{type(exception).__name__}:{exception}:{next(self._sequence)}:{datetime.now().isoformat()}"
        return hashlib.sha1(key.encode('utf-8')).hexdigest()[:8]

    def _log_error(self, info: ErrorInfo) -> None:
        extra = {
            'error_id': info.error_id,
            'category': info.category.value,
            'severity': info.severity.value,
            'context': info.context,
            'exception_type': type(info.exception).__name__,
        }
        if info.exception.__traceback__ is not None:
            extra['traceback'] = ''.join(traceback.format_exception(
                type(info.exception), info.exception, info.exception.__traceback__))
        self.logger.log(_LOG_LEVEL_BY_SEVERITY[info.severity], f"Error {info.error_id}: {info.exception}", extra=extra)

    def get_error_statistics(self) -> Dict[str, Any]:
        with self._lock:
            return {
                'total_errors': self.total_errors,
                'error_counts_by_type': dict(self.error_counts),
                'error_history_size': len(self.error_history),
            }

    def clear_error_history(self) -> None:
        with self._lock:
            self.error_history.clear()
            self.error_counts.clear()
            self.total_errors = 0


_global_error_handler: Optional[ErrorHandler] = None


def get_error_handler() -> ErrorHandler:
    """Process-wide handler used when a component is not given one."""
    global _global_error_handler
    if _global_error_handler is None:
        _global_error_handler = ErrorHandler()
    return _global_error_handler
