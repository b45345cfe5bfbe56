"""Experiment runner: the dataset -> train -> extract -> localize -> evaluate -> plot pipeline."""

from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Union

from .evaluation.evaluator import Evaluator
from .evaluation.grid import read_grid, write_grid, write_results
from .evaluation.plots import plot_qf_curves, plot_recompression_matrix
from .evaluation.trends import compare_trends
from .forge.dataset_forge import DatasetForge
from .localization.localizer import Localizer, comprint_files
from .models.compression import LOSSLESS_VARIANT, VARIANTS, get_recipe
from .models.experiment_config import ExperimentConfig
from .models.results import ResultGrid
from .models.run_record import STAGES, RunRecord, StageStatus
from .network.workflow import FINAL_CHECKPOINT, extract_manifest, train_recipe
from .utils.error_handler import ConfigurationError, MissingArtifactError
from .utils.logging_config import LoggingConfig, get_logger
from .utils.performance_monitor import PerformanceContext
from .utils.run_persistence import RunStore, artifact_hash, default_run_dir

RESULTS_FILE = "results.csv"
GRID_FILE = "grid.csv"
TRENDS_FILE = "trends.yaml"
QF_CURVES_FILE = "qf_curves.png"


def order_stages(stages: Optional[Iterable[str]]) -> List[str]:
    """Requested stages in dependency order (all stages for None)."""
    if stages is None:
        return list(STAGES)
    requested = set(stages)
    unknown = sorted(requested - set(STAGES))
    if unknown:
        raise ConfigurationError(f"unknown stage(s) {', '.join(unknown)}; expected: {', '.join(STAGES)}")
    return [s for s in STAGES if s in requested]


class ExperimentRunner:
    """
    Runs pipeline stages inside one run directory.

    Each stage records its config hash and an artifact hash in the run's
    MANIFEST. A completed stage whose hash still matches is reused; one
    whose hash differs is refused unless `force` is set.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        run_dir: Optional[Union[str, Path]] = None,
        force: bool = False,
        show_progress: bool = False,
        logging_config: Optional[LoggingConfig] = None
    ):
        self.config = config
        self.store = RunStore(run_dir or default_run_dir(config))
        self.force = force
        self.show_progress = show_progress
        self.logging_config = logging_config or LoggingConfig(console_logging=False, file_logging=False)
        self.logger = get_logger(__name__)
        self.forge = DatasetForge(self.store.stage_dir('dataset'), config.seed,
                                  workers=config.workers, show_progress=show_progress)
        self._stage_functions: Dict[str, Callable[[], List[Path]]] = {
            'dataset': self._run_dataset,
            'train': self._run_train,
            'extract': self._run_extract,
            'localize': self._run_localize,
            'evaluate': self._run_evaluate,
            'plot': self._run_plot,
        }

    @property
    def run_dir(self) -> Path:
        return self.store.run_dir

    @property
    def recipe_keys(self) -> List[str]:
        return list(self.config.dataset.recipes)

    def run_pipeline(self, stages: Optional[Iterable[str]] = None) -> RunRecord:
        """
        Execute the requested stages in dependency order.

        Raises:
            MissingArtifactError: An upstream stage has neither run nor been requested
            ConfigurationError: A completed stage was built from a different config
        """
        requested = order_stages(stages)
        record = self.store.open(self.config)
        handler = self.logging_config.add_file_handler(None, self.store.log_path, json_format=True,
                                                       run_id=record.run_id)
        try:
            self.logger.info(f"Run {record.run_id} in {self.run_dir}: {', '.join(requested)}",
                             extra={'run_id': record.run_id, 'config_hash': record.config_hash})
            for stage in requested:
                self._check_upstream(record, stage, requested)
                if self._reusable(record, stage):
                    record.stage(stage).status = StageStatus.REUSED
                    self.store.save(record)
                    self.logger.info(f"Stage {stage} reused", extra=self._stage_extra(record, stage))
                    continue
                self._execute(record, stage)
        finally:
            handler.close()
            self.logging_config.remove_handler(None, handler)
        return record

    def _check_upstream(self, record: RunRecord, stage: str, requested: List[str]) -> None:
        """Every earlier stage back to the nearest requested one must be done with the current config."""
        for upstream in reversed(STAGES[:STAGES.index(stage)]):
            if upstream in requested:
                return
            upstream_record = record.stage(upstream)
            if not upstream_record.is_done:
                raise MissingArtifactError(upstream, f"stage '{stage}' needs its outputs in {self.run_dir}")
            if upstream_record.stage_hash != self.config.stage_hash(upstream):
                if not self.force:
                    raise ConfigurationError(
                        f"stage '{upstream}' in {self.run_dir} was built from a different configuration; "
                        f"rerun it or pass --force"
                    )
                self.logger.warning(f"Using outputs of '{upstream}' built from a different configuration (--force)")

    def _reusable(self, record: RunRecord, stage: str) -> bool:
        stage_record = record.stage(stage)
        if not stage_record.is_done:
            return False
        if stage_record.stage_hash != self.config.stage_hash(stage):
            if self.force:
                self.logger.warning(f"Recomputing '{stage}' for a changed configuration (--force)")
                return False
            raise ConfigurationError(
                f"stage '{stage}' in {self.run_dir} was computed with a different configuration "
                f"(hash {stage_record.stage_hash[:12]} vs {self.config.stage_hash(stage)[:12]}); "
                f"use another --out or pass --force"
            )
        if self.force:
            return False
        paths = [self.run_dir / p for p in stage_record.artifact_paths]
        if not all(p.exists() for p in paths) or artifact_hash(paths) != stage_record.artifact_hash:
            self.logger.warning(f"Artifacts of '{stage}' changed on disk; recomputing")
            return False
        return True

    def _execute(self, record: RunRecord, stage: str) -> None:
        stage_record = record.stage(stage)
        stage_record.status = StageStatus.PENDING
        stage_record.error = None
        self.store.save(record)
        with PerformanceContext(f"stage:{stage}") as perf:
            try:
                paths = self._stage_functions[stage]()
            except Exception as e:
                stage_record.status = StageStatus.FAILED
                stage_record.error = f"{type(e).__name__}: {e}"
                self.store.save(record)
                raise
            perf.update_metrics(items_processed=len(paths))
        stage_record.status = StageStatus.COMPLETED
        stage_record.stage_hash = self.config.stage_hash(stage)
        stage_record.artifact_paths = [self.store.relative(p) for p in paths]
        stage_record.artifact_hash = artifact_hash(paths)
        stage_record.wall_time = perf.metrics.duration_seconds
        stage_record.finished_at = datetime.now(timezone.utc)
        self.store.save(record)
        extra = self._stage_extra(record, stage)
        extra['rss_mb'] = perf.metrics.peak_rss_mb
        self.logger.info(f"Stage {stage} completed in {stage_record.wall_time:.1f}s", extra=extra)

    def _stage_extra(self, record: RunRecord, stage: str) -> Dict[str, Any]:
        stage_record = record.stage(stage)
        return {
            'stage': stage,
            'status': stage_record.status.value,
            'wall_time': stage_record.wall_time,
            'seed': self.config.seed,
            'stage_hash': stage_record.stage_hash,
            'artifact_hash': stage_record.artifact_hash,
        }

    # Stage bodies: each returns the artifact paths it produced

    def _run_dataset(self) -> List[Path]:
        self.forge.build_all(self.config.dataset)
        return self.forge.manifest_paths(self.recipe_keys)

    def _run_train(self) -> List[Path]:
        paths = []
        for key in self.recipe_keys:
            out_dir = self.store.stage_dir('train') / key
            train_recipe(self.forge.training_manifest(key), self.forge.root, self.config.model,
                         seed=self.config.seed, out_dir=out_dir)
            paths.append(out_dir / FINAL_CHECKPOINT)
        return paths

    def _run_extract(self) -> List[Path]:
        manifest = self.forge.test_manifest()
        paths: List[Path] = []
        for key in self.recipe_keys:
            checkpoint = self.store.stage_dir('train') / key / FINAL_CHECKPOINT
            paths += extract_manifest(
                checkpoint, manifest, self.forge.root, self.store.stage_dir('extract') / key,
                tile=self.config.model.tile, overlap=self.config.model.overlap,
                workers=self.config.workers, device=self.config.model.device,
                show_progress=self.show_progress,
            )
        return paths

    def _run_localize(self) -> List[Path]:
        localizer = Localizer(self.config.localization, seed=self.config.seed)
        paths: List[Path] = []
        for key in self.recipe_keys:
            files = comprint_files(self.store.stage_dir('extract') / key)
            if not files:
                raise MissingArtifactError('extract', f"no comprints for {key}")
            paths += localizer.localize_paths(files, self.store.stage_dir('localize') / key,
                                              workers=self.config.workers, show_progress=self.show_progress)
        return paths

    def _run_evaluate(self) -> List[Path]:
        evaluator = Evaluator(self.config.evaluation, workers=self.config.workers, show_progress=self.show_progress)
        manifest = self.forge.test_manifest()
        results = []
        cells = {}
        for key in self.recipe_keys:
            model_results, grid = evaluator.evaluate(self.store.stage_dir('localize') / key, manifest,
                                                     self.forge.root, get_recipe(key).name)
            results += model_results
            cells.update(grid.cells)
        out_dir = self.store.stage_dir('evaluate', create=True)
        return [write_results(results, out_dir / RESULTS_FILE), write_grid(ResultGrid(cells=cells), out_dir / GRID_FILE)]

    def _run_plot(self) -> List[Path]:
        grid_path = self.store.stage_dir('evaluate') / GRID_FILE
        if not grid_path.is_file():
            raise MissingArtifactError('evaluate', f"no result grid at {grid_path}")
        grid = read_grid(grid_path)
        out_dir = self.store.stage_dir('plot', create=True)
        paths = list(plot_qf_curves(grid, out_dir / QF_CURVES_FILE, variant=LOSSLESS_VARIANT))
        for model in grid.models:
            if any(grid.has_variant(model, v) for v in VARIANTS if v != LOSSLESS_VARIANT):
                paths += plot_recompression_matrix(grid, model, out_dir / f"recompression_{model.lower()}.png")
            else:
                self.logger.warning(f"No recompressed results for {model}; skipping its matrix")
        paths.append(compare_trends(grid).save(out_dir / TRENDS_FILE))
        return paths

    def summarize(self) -> Dict[str, Any]:
        """Stage statuses, grid size and trend verdicts of the run directory."""
        record = self.store.load()
        if record is None:
            raise MissingArtifactError('run', f"no run at {self.run_dir}")
        summary: Dict[str, Any] = {
            'run_id': record.run_id,
            'run_dir': str(self.run_dir),
            'config_hash': record.config_hash,
            'stages': {name: record.stage(name).status.value for name in STAGES},
        }
        grid_path = self.store.stage_dir('evaluate') / GRID_FILE
        if grid_path.is_file():
            grid = read_grid(grid_path)
            summary['grid_cells'] = len(grid)
            summary['models'] = grid.models
            summary['trends'] = {c.key: c.verdict.value for c in compare_trends(grid).claims}
        return summary
