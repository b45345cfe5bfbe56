"""Tests for hashing, batch processing, errors, logging and run persistence."""

import json
import logging
import threading
import time

import pytest

from src.models.experiment_config import ExperimentConfig
from src.models.run_record import StageStatus
from src.utils.batch_processor import BatchMode, BatchProcessor
from src.utils.error_handler import (
    ConfigurationError, DataError, ErrorCategory, ErrorHandler, InsufficientImagesError,
    MissingArtifactError, TrainingDivergedError, ValidationError
)
from src.utils.hashing import bytes_checksum, canonical_json, combine_hashes, content_hash, stable_seed
from src.utils.logging_config import JsonFormatter, LoggingConfig, LogLevel
from src.utils.performance_monitor import PerformanceContext, PerformanceMonitor
from src.utils.run_persistence import (
    MANIFEST_NAME, RunStore, artifact_hash, default_run_dir, new_run_id
)


class TestHashing:

    def test_stable_seed(self):
        assert stable_seed(0, "img_01") == stable_seed(0, "img_01")
        assert stable_seed(0, "img_01") != stable_seed(1, "img_01")
        assert stable_seed(0, "img_01") != stable_seed(0, "img_02")
        assert 0 <= stable_seed(5, "x") < 2 ** 64

    def test_content_hash_ignores_key_order(self):
        assert content_hash({'a': 1, 'b': [1, 2]}) == content_hash({'b': [1, 2], 'a': 1})
        assert content_hash({'a': 1}) != content_hash({'a': 2})
        assert canonical_json({'b': 1, 'a': 2}) == '{"a":2,"b":1}'

    def test_combine_hashes_is_order_sensitive(self):
        a, b = bytes_checksum(b"a"), bytes_checksum(b"b")
        assert combine_hashes([a, b]) != combine_hashes([b, a])


class TestBatchProcessor:

    def test_parallel_keeps_input_order(self):
        def slow_square(x):
            time.sleep(0.01 * (5 - x % 5))
            return x * x

        processor = BatchProcessor(max_workers=4, show_progress=False)
        assert processor.mode is BatchMode.PARALLEL
        assert processor.map(slow_square, range(12)) == [x * x for x in range(12)]

    def test_sequential_matches_parallel(self):
        items = list(range(20))
        sequential = BatchProcessor(max_workers=1, show_progress=False).map(lambda x: x + 1, items)
        parallel = BatchProcessor(max_workers=3, show_progress=False).map(lambda x: x + 1, items)
        assert sequential == parallel

    def test_parallel_uses_threads(self):
        seen = set()
        barrier = threading.Barrier(2, timeout=5)

        def record(x):
            seen.add(threading.get_ident())
            barrier.wait()
            return x

        BatchProcessor(max_workers=2, show_progress=False).map(record, [1, 2])
        assert len(seen) == 2

    def test_skip_errors(self):
        def fragile(x):
            if x == 2:
                raise DataError("bad item")
            return x

        handler = ErrorHandler()
        processor = BatchProcessor(max_workers=1, show_progress=False, error_handler=handler)
        assert processor.map(fragile, [1, 2, 3], skip_errors=True) == [1, None, 3]
        assert processor.last_report.failed == ["2"]
        assert processor.last_report.succeeded == 2
        assert handler.get_error_statistics()['error_counts_by_type'] == {'DataError': 1}

    def test_parallel_skip_errors_are_counted_exactly(self):
        def fragile(x):
            time.sleep(0.001 * (x % 4))
            if x % 3 == 0:
                raise DataError(f"bad {x}")
            return x

        handler = ErrorHandler(error_reporting_enabled=False)
        processor = BatchProcessor(max_workers=8, show_progress=False, error_handler=handler)
        results = processor.map(fragile, range(300), skip_errors=True)
        assert results == [None if x % 3 == 0 else x for x in range(300)]
        assert processor.last_report.succeeded == 200
        assert processor.last_report.failed == [str(x) for x in range(0, 300, 3)]
        stats = handler.get_error_statistics()
        assert stats['total_errors'] == 100
        assert stats['error_counts_by_type'] == {'DataError': 100}

    def test_errors_propagate_by_default(self):
        def fail(_):
            raise ValueError("boom")

        with pytest.raises(ValueError, match="boom"):
            BatchProcessor(max_workers=2, show_progress=False).map(fail, [1, 2, 3])

    def test_invalid_worker_count(self):
        with pytest.raises(ValueError):
            BatchProcessor(max_workers=0)


class TestErrors:

    def test_messages(self):
        assert str(MissingArtifactError('localize')) == "run 'localize' first"
        assert str(MissingArtifactError('train', "no checkpoint")) == "run 'train' first (no checkpoint)"
        error = InsufficientImagesError(need=10, have=4)
        assert str(error) == "insufficient images: need 10, have 4"
        assert isinstance(error, ValidationError)

    @pytest.mark.parametrize("exception, code", [
        (MissingArtifactError('dataset'), 2),
        (ConfigurationError("x"), 1),
        (ValidationError("x"), 1),
        (InsufficientImagesError(2, 1), 1),
        (TrainingDivergedError("nan"), 3),
        (RuntimeError("x"), 3),
    ])
    def test_exit_codes(self, exception, code):
        assert ErrorHandler.exit_code_for(exception) == code

    def test_classification_and_history(self):
        handler = ErrorHandler(max_error_history=2)
        assert handler.classify(ConfigurationError("x")) is ErrorCategory.CONFIGURATION
        assert handler.classify(MissingArtifactError("x")) is ErrorCategory.DEPENDENCY
        assert handler.classify(FileNotFoundError("x")) is ErrorCategory.FILE_SYSTEM
        for i in range(3):
            info = handler.handle_error(DataError(f"e{i}"), context={'i': i})
        assert info.context == {'i': 2}
        assert handler.get_error_statistics()['total_errors'] == 3
        assert len(handler.error_history) == 2

    def test_concurrent_handling_keeps_every_count(self):
        handler = ErrorHandler(max_error_history=10, error_reporting_enabled=False)

        def burst(_):
            for _ in range(200):
                handler.handle_error(DataError("bad pixels"))

        threads = [threading.Thread(target=burst, args=(i,)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        stats = handler.get_error_statistics()
        assert stats['total_errors'] == 1600
        assert stats['error_counts_by_type'] == {'DataError': 1600}
        assert stats['error_history_size'] == 10

    def test_exception_details_join_the_context(self):
        handler = ErrorHandler(error_reporting_enabled=False)
        info = handler.handle_error(
            TrainingDivergedError("siamese loss diverged", stage="siamese", where="step 7", last_finite_loss=0.4),
            context={'command': 'train'},
        )
        assert info.category is ErrorCategory.TRAINING
        assert info.context == {'command': 'train', 'training_stage': 'siamese',
                                'where': 'step 7', 'last_finite_loss': 0.4}
        assert handler.handle_error(MissingArtifactError('extract')).context == {'missing_stage': 'extract'}
        assert info.to_dict()['exception_type'] == 'TrainingDivergedError'


class TestLogging:

    def test_json_formatter_lifts_extra_fields(self):
        record = logging.LogRecord("src.forge", logging.INFO, __file__, 1, "built %s", ("x",), None)
        record.seed = 3
        record.stage = "dataset"
        data = json.loads(JsonFormatter().format(record))
        assert data['message'] == "built x"
        assert data['level'] == "INFO"
        assert data['seed'] == 3
        assert data['stage'] == "dataset"

    def test_run_file_handler(self, tmp_path):
        config = LoggingConfig(log_level=LogLevel.INFO, console_logging=False, file_logging=False)
        logger = logging.getLogger("comprint.test.run_log")
        logger.setLevel(logging.INFO)
        handler = config.add_file_handler("comprint.test.run_log", tmp_path / "logs" / "run.log")
        try:
            logger.info("stage done", extra={'stage': 'train', 'wall_time': 1.5})
        finally:
            handler.close()
            config.remove_handler("comprint.test.run_log", handler)
        line = json.loads((tmp_path / "logs" / "run.log").read_text(encoding='utf-8').strip())
        assert line['stage'] == 'train'
        assert line['wall_time'] == 1.5
        assert 'run_id' not in line
        assert handler not in logger.handlers

    def test_run_id_is_stamped_on_every_line(self):
        record = logging.LogRecord("src.runner", logging.INFO, __file__, 1, "go", None, None)
        data = json.loads(JsonFormatter(static_fields={'run_id': '20260101T000000Z-abc'}).format(record))
        assert data['run_id'] == '20260101T000000Z-abc'

    def test_setup_replaces_handlers(self, tmp_path):
        name = "comprint.test.setup"
        config = LoggingConfig(log_level=LogLevel.DEBUG, log_dir=tmp_path, console_logging=True,
                               colored_console=False, file_logging=True, json_format=True)
        logger = config.setup_logging(name)
        logger = config.setup_logging(name)
        try:
            assert len(logger.handlers) == 2
            assert config.log_file_path == tmp_path / "comprint_lab.log"
            assert logging.getLogger('PIL').level == logging.WARNING
        finally:
            for handler in list(logger.handlers):
                logger.removeHandler(handler)
                handler.close()


class TestPerformance:

    def test_context_records_duration(self):
        monitor = PerformanceMonitor()
        with PerformanceContext("work", monitor) as perf:
            perf.update_metrics(items_processed=4)
        assert perf.metrics.duration_seconds >= 0.0
        assert perf.metrics.items_processed == 4
        assert perf.metrics.peak_rss_mb > 0
        summary = monitor.get_performance_summary()
        assert summary['tracked'] == 1
        assert summary['operations']['work']['count'] == 1


class TestRunStore:

    def test_default_run_dir_and_id(self):
        config = ExperimentConfig(runs_root="runs")
        assert default_run_dir(config).name == f"desk-{config.config_hash[:12]}"
        run_id = new_run_id(config.config_hash)
        assert run_id.endswith(config.config_hash[:12])

    def test_open_creates_manifest_and_config(self, tmp_path):
        config = ExperimentConfig(seed=5)
        store = RunStore(tmp_path / "run")
        assert store.load() is None
        record = store.open(config)
        assert (tmp_path / "run" / MANIFEST_NAME).is_file()
        assert store.read_resolved_config() == config
        assert record.config_hash == config.config_hash
        assert record.log_path == "logs/run.log"

        record.stage('dataset').status = StageStatus.COMPLETED
        store.save(record)
        again = store.open(config)
        assert again.stage('dataset').status is StageStatus.COMPLETED
        assert len(again.history) == 2

    def test_stage_dir(self, tmp_path):
        store = RunStore(tmp_path)
        assert store.stage_dir('train', create=True).is_dir()
        with pytest.raises(ValueError):
            store.stage_dir('deploy')

    def test_artifact_hash(self, tmp_path):
        (tmp_path / "d").mkdir()
        (tmp_path / "d" / "a.bin").write_bytes(b"a")
        (tmp_path / "b.bin").write_bytes(b"b")
        first = artifact_hash([tmp_path / "d", tmp_path / "b.bin"])
        assert first == artifact_hash([tmp_path / "b.bin", tmp_path / "d"])
        (tmp_path / "d" / "a.bin").write_bytes(b"changed")
        assert artifact_hash([tmp_path / "d", tmp_path / "b.bin"]) != first
