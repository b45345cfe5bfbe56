"""Order-preserving batch execution over images."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar

from tqdm import tqdm

from .error_handler import ErrorHandler, get_error_handler
from .logging_config import get_logger

T = TypeVar('T')
R = TypeVar('R')


class BatchMode(Enum):
    """Batch processing modes."""
    SEQUENTIAL = "sequential"  # Process items one by one
    PARALLEL = "parallel"  # Process items on a thread pool


@dataclass
class BatchReport:
    """Outcome of one `BatchProcessor.map` call."""
    total: int = 0
    succeeded: int = 0
    failed: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {'total': self.total, 'succeeded': self.succeeded, 'failed': list(self.failed)}


class BatchProcessor:
    """
    Maps a function over items, sequentially or on a thread pool.

    Results keep the input order whatever the completion order, so callers
    that draw per-item randomness from (seed, item id) get identical output
    in both modes. numpy, Pillow and torch release the GIL in their kernels,
    which is what makes threads worthwhile here.
    """

    def __init__(
        self,
        max_workers: int = 1,
        mode: Optional[BatchMode] = None,
        show_progress: bool = True,
        error_handler: Optional[ErrorHandler] = None
    ):
        """
        Initialize batch processor.

        Args:
            max_workers: Thread count for PARALLEL mode
            mode: Processing mode (PARALLEL when max_workers > 1 if None)
            show_progress: Display a tqdm progress bar
            error_handler: Handler recording per-item failures in skip mode
        """
        if max_workers < 1:
            raise ValueError("max_workers must be at least 1")
        self.max_workers = max_workers
        self.mode = mode or (BatchMode.PARALLEL if max_workers > 1 else BatchMode.SEQUENTIAL)
        self.show_progress = show_progress
        self.error_handler = error_handler or get_error_handler()
        self.logger = get_logger(__name__)
        self.last_report = BatchReport()

    def map(
        self,
        func: Callable[[T], R],
        items: Sequence[T],
        desc: str = "processing",
        skip_errors: bool = False,
        item_name: Callable[[T], str] = str
    ) -> List[Optional[R]]:
        """
        Apply `func` to every item.

        Args:
            func: Per-item function
            items: Items to process
            desc: Progress bar label
            skip_errors: Record failures and yield None instead of raising
            item_name: Label for an item in failure reports

        Returns:
            Results in input order (None for skipped failures)
        """
        items = list(items)
        report = BatchReport(total=len(items))
        self.last_report = report

        def run_one(item: T) -> Tuple[bool, Optional[R]]:
            try:
                return True, func(item)
            except Exception as e:
                if not skip_errors:
                    raise
                self.error_handler.handle_error(e, context={'item': item_name(item), 'batch': desc})
                return False, None

        if self.mode is BatchMode.SEQUENTIAL or len(items) <= 1:
            iterator: Iterable = map(run_one, items)
            outcomes = list(self._progress(iterator, len(items), desc))
        else:
            with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
                outcomes = list(self._progress(executor.map(run_one, items), len(items), desc))

        # tallied here, on the calling thread, in input order
        results: List[Optional[R]] = []
        for item, (ok, result) in zip(items, outcomes):
            if ok:
                report.succeeded += 1
            else:
                report.failed.append(item_name(item))
            results.append(result)

        if report.failed:
            self.logger.warning(f"{desc}: {len(report.failed)}/{report.total} items failed")
        return results

    def _progress(self, iterator: Iterable, total: int, desc: str) -> Iterable:
        if not self.show_progress:
            return iterator
        return tqdm(iterator, total=total, desc=desc, leave=False)
