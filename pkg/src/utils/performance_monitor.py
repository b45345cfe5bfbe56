"""Wall-time and memory measurement for pipeline stages."""

import time
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional

from .logging_config import get_logger

try:
    import psutil
    PSUTIL_AVAILABLE = True
except ImportError:
    PSUTIL_AVAILABLE = False


def current_rss_mb() -> float:
    """Resident set size of this process in MiB (0.0 without psutil)."""
    if not PSUTIL_AVAILABLE:
        return 0.0
    return psutil.Process().memory_info().rss / (1024 * 1024)


@dataclass
class PerformanceMetrics:
    """Measurements for one tracked operation."""

    operation_name: str
    start_time: datetime
    end_time: Optional[datetime] = None
    duration_seconds: float = 0.0
    items_processed: int = 0
    start_rss_mb: float = 0.0
    peak_rss_mb: float = 0.0
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def throughput_items_per_second(self) -> float:
        if self.duration_seconds <= 0:
            return 0.0
        return self.items_processed / self.duration_seconds

    def to_dict(self) -> Dict[str, Any]:
        """Flat record for the run log."""
        return {
            "operation_name": self.operation_name,
            "start_time": self.start_time.isoformat(),
            "end_time": self.end_time.isoformat() if self.end_time else None,
            "duration_seconds": self.duration_seconds,
            "items_processed": self.items_processed,
            "start_rss_mb": self.start_rss_mb,
            "peak_rss_mb": self.peak_rss_mb,
            "throughput_items_per_second": self.throughput_items_per_second,
            **self.extra,
        }


class PerformanceMonitor:
    """Collects `PerformanceMetrics` for completed operations."""

    def __init__(self, max_history: int = 1000):
        self.max_history = max_history
        self.completed_metrics: List[PerformanceMetrics] = []
        self.logger = get_logger(__name__)

    def record(self, metrics: PerformanceMetrics) -> None:
        self.completed_metrics.append(metrics)
        if len(self.completed_metrics) > self.max_history:
            self.completed_metrics = self.completed_metrics[-self.max_history:]
        self.logger.debug(
            f"{metrics.operation_name} finished in {metrics.duration_seconds:.2f}s",
            extra={'operation': metrics.operation_name, 'rss_mb': round(metrics.peak_rss_mb, 1)}
        )

    def get_performance_summary(self) -> Dict[str, Any]:
        """Totals per operation name."""
        summary: Dict[str, Dict[str, float]] = {}
        for m in self.completed_metrics:
            entry = summary.setdefault(m.operation_name, {'count': 0, 'total_seconds': 0.0, 'peak_rss_mb': 0.0})
            entry['count'] += 1
            entry['total_seconds'] += m.duration_seconds
            entry['peak_rss_mb'] = max(entry['peak_rss_mb'], m.peak_rss_mb)
        return {'operations': summary, 'tracked': len(self.completed_metrics)}

    def clear_history(self) -> None:
        self.completed_metrics.clear()


class PerformanceContext:
    """
    Context manager timing a block and sampling memory on entry and exit.

    Example:
        with PerformanceContext("localize") as perf:
            ...
            perf.update_metrics(items_processed=12)
        perf.metrics.duration_seconds
    """

    def __init__(self, operation_name: str, monitor: Optional[PerformanceMonitor] = None):
        """
        Args:
            operation_name: Label in the run log (a stage name or a sub-step)
            monitor: Defaults to the process-wide monitor
        """
        self.operation_name = operation_name
        self.monitor = monitor or get_performance_monitor()
        self.metrics = PerformanceMetrics(operation_name=operation_name, start_time=datetime.now())
        self._t0 = 0.0

    def __enter__(self) -> "PerformanceContext":
        self.metrics.start_time = datetime.now()
        self.metrics.start_rss_mb = current_rss_mb()
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.metrics.duration_seconds = time.perf_counter() - self._t0
        self.metrics.end_time = datetime.now()
        self.metrics.peak_rss_mb = max(self.metrics.start_rss_mb, current_rss_mb())
        self.monitor.record(self.metrics)

    def update_metrics(self, items_processed: int = 0, **extra: Any) -> None:
        """Add processed items and attach extra fields to the record."""
        self.metrics.items_processed += items_processed
        self.metrics.extra.update(extra)


# process-wide monitor shared by every stage
_global_performance_monitor: Optional[PerformanceMonitor] = None


def get_performance_monitor() -> PerformanceMonitor:
    """Monitor shared by the runner and the stage commands."""
    global _global_performance_monitor

    if _global_performance_monitor is None:
        _global_performance_monitor = PerformanceMonitor()

    return _global_performance_monitor
