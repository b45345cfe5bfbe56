"""Tests for stage ordering, reuse, refusal and failure bookkeeping of the runner."""

from collections import Counter

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from src.evaluation.grid import write_grid
from src.evaluation.metrics import max_mcc
from src.experiment_runner import GRID_FILE, QF_CURVES_FILE, TRENDS_FILE, ExperimentRunner, order_stages
from src.forge.composites import composite_mask
from src.localization.heatmap import load_heatmap, load_heatmap_params
from src.models.compression import LOSSLESS_VARIANT
from src.models.experiment_config import ExperimentConfig
from src.models.run_record import STAGES, StageStatus
from src.network.extraction import Comprint, save_comprint
from src.utils.error_handler import ConfigurationError, MissingArtifactError
from src.utils.hashing import stable_seed

FAKE_STAGES = STAGES[:-1]


def _score(model, qf, variant):
    bonus = {'HighQF': 0.05, 'WideQF': 0.0, 'HighQFRec': 0.1}[model]
    return 0.2 + qf / 200 + bonus


def _spliced_comprint(seed, source_id, shape=(96, 128)):
    """Noise on the left, equally strong smooth noise on the right."""
    rng = np.random.default_rng(seed)
    left = rng.normal(size=shape)
    right = gaussian_filter(rng.normal(size=shape), sigma=2.0)
    right *= left.std() / right.std()
    values = np.concatenate([left[:, :shape[1] // 2], right[:, shape[1] // 2:]], axis=1)
    return Comprint(values=values.astype(np.float32), source_id=source_id, model_tag="HighQF")


def make_runner(config, run_dir, calls, force=False, grid=None, fail=None):
    """Runner whose stage bodies only write small marker files (plot stays real)."""
    runner = ExperimentRunner(config, run_dir=run_dir, force=force)

    def fake(stage):
        def body():
            calls[stage] += 1
            if stage == fail:
                raise RuntimeError("boom")
            if stage == 'evaluate' and grid is not None:
                return [write_grid(grid, run_dir / 'evaluate' / GRID_FILE)]
            out = run_dir / stage / "out.txt"
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(f"{stage} {config.stage_hash(stage)}", encoding='utf-8')
            return [out]
        return body

    for stage in FAKE_STAGES:
        runner._stage_functions[stage] = fake(stage)
    return runner


class TestOrderStages:

    def test_dependency_order(self):
        assert order_stages(['plot', 'dataset', 'train']) == ['dataset', 'train', 'plot']
        assert order_stages(None) == list(STAGES)

    def test_unknown_stage(self):
        with pytest.raises(ConfigurationError, match="unknown stage"):
            order_stages(['dataset', 'deploy'])


class TestExperimentRunner:

    def test_first_run_then_reuse(self, tmp_path):
        calls = Counter()
        config = ExperimentConfig()
        record = make_runner(config, tmp_path, calls).run_pipeline(FAKE_STAGES)
        assert all(record.stage(s).status is StageStatus.COMPLETED for s in FAKE_STAGES)
        assert record.stage('train').stage_hash == config.stage_hash('train')
        assert record.stage('dataset').artifact_paths == ["dataset/out.txt"]

        record = make_runner(config, tmp_path, calls).run_pipeline(FAKE_STAGES)
        assert all(record.stage(s).status is StageStatus.REUSED for s in FAKE_STAGES)
        assert set(calls.values()) == {1}
        assert len(record.history) == 2

    def test_missing_upstream(self, tmp_path):
        with pytest.raises(MissingArtifactError, match="run 'localize' first"):
            make_runner(ExperimentConfig(), tmp_path, Counter()).run_pipeline(['evaluate'])

    def test_single_stage_after_upstream(self, tmp_path):
        calls = Counter()
        config = ExperimentConfig()
        make_runner(config, tmp_path, calls).run_pipeline(['dataset'])
        record = make_runner(config, tmp_path, calls).run_pipeline(['train'])
        assert record.stage('train').status is StageStatus.COMPLETED
        assert calls == Counter({'dataset': 1, 'train': 1})

    def test_changed_config_is_refused(self, tmp_path):
        calls = Counter()
        make_runner(ExperimentConfig(seed=1), tmp_path, calls).run_pipeline(['dataset', 'train'])
        with pytest.raises(ConfigurationError, match="different configuration"):
            make_runner(ExperimentConfig(seed=2), tmp_path, calls).run_pipeline(['dataset', 'train'])
        with pytest.raises(ConfigurationError, match="different configuration"):
            make_runner(ExperimentConfig(seed=2), tmp_path, calls).run_pipeline(['extract'])
        assert calls == Counter({'dataset': 1, 'train': 1})

    def test_force_recomputes(self, tmp_path):
        calls = Counter()
        make_runner(ExperimentConfig(seed=1), tmp_path, calls).run_pipeline(['dataset', 'train'])
        record = make_runner(ExperimentConfig(seed=2), tmp_path, calls, force=True).run_pipeline(['dataset', 'train'])
        assert calls == Counter({'dataset': 2, 'train': 2})
        assert record.stage('dataset').stage_hash == ExperimentConfig(seed=2).stage_hash('dataset')

    def test_downstream_only_change(self, tmp_path):
        calls = Counter()
        base = ExperimentConfig()
        make_runner(base, tmp_path, calls).run_pipeline(['dataset', 'train', 'extract'])
        changed = ExperimentConfig.from_dict({'localization': {'window': 64}})
        record = make_runner(changed, tmp_path, calls).run_pipeline(['dataset', 'train', 'extract', 'localize'])
        assert [record.stage(s).status for s in ('dataset', 'train', 'extract')] == [StageStatus.REUSED] * 3
        assert record.stage('localize').status is StageStatus.COMPLETED

    def test_changed_artifacts_are_recomputed(self, tmp_path):
        calls = Counter()
        config = ExperimentConfig()
        make_runner(config, tmp_path, calls).run_pipeline(['dataset', 'train'])
        (tmp_path / "dataset" / "out.txt").write_text("tampered", encoding='utf-8')
        record = make_runner(config, tmp_path, calls).run_pipeline(['dataset', 'train'])
        assert record.stage('dataset').status is StageStatus.COMPLETED
        assert record.stage('train').status is StageStatus.REUSED
        assert calls == Counter({'dataset': 2, 'train': 1})

    def test_failed_stage_is_recorded(self, tmp_path):
        calls = Counter()
        runner = make_runner(ExperimentConfig(), tmp_path, calls, fail='train')
        with pytest.raises(RuntimeError, match="boom"):
            runner.run_pipeline(['dataset', 'train', 'extract'])
        record = runner.store.load()
        assert record.stage('dataset').status is StageStatus.COMPLETED
        assert record.stage('train').status is StageStatus.FAILED
        assert record.stage('train').error == "RuntimeError: boom"
        assert record.stage('extract').status is StageStatus.PENDING
        assert 'extract' not in calls

    def test_plot_stage_and_summary(self, tmp_path, full_grid):
        calls = Counter()
        runner = make_runner(ExperimentConfig(), tmp_path, calls, grid=full_grid(_score))
        record = runner.run_pipeline()
        assert record.stage('plot').status is StageStatus.COMPLETED

        plot_dir = tmp_path / "plot"
        assert (plot_dir / QF_CURVES_FILE).is_file()
        assert (plot_dir / TRENDS_FILE).is_file()
        for model in ("highqf", "wideqf", "highqfrec"):
            assert (plot_dir / f"recompression_{model}.png").is_file()
            assert (plot_dir / f"recompression_{model}.csv").is_file()

        summary = runner.summarize()
        assert summary['stages'] == {s: 'completed' for s in STAGES}
        assert summary['grid_cells'] == 3 * 15 * 8
        assert summary['models'] == ["HighQF", "HighQFRec", "WideQF"]
        assert set(summary['trends'].values()) == {'pass'}

    def test_plot_skips_matrix_without_recompression(self, tmp_path, full_grid):
        grid = full_grid(_score)
        grid.cells = {k: v for k, v in grid.cells.items() if k[0] != 'WideQF' or k[2] == LOSSLESS_VARIANT}
        make_runner(ExperimentConfig(), tmp_path, Counter(), grid=grid).run_pipeline()
        assert not (tmp_path / "plot" / "recompression_wideqf.png").exists()
        assert (tmp_path / "plot" / "recompression_highqf.png").is_file()

    def test_summarize_without_run(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            ExperimentRunner(ExperimentConfig(), run_dir=tmp_path / "empty").summarize()

    def test_stale_stage_further_upstream_is_refused(self, tmp_path):
        calls = Counter()
        make_runner(ExperimentConfig(seed=1), tmp_path, calls).run_pipeline(['dataset', 'train'])
        make_runner(ExperimentConfig(seed=2), tmp_path, calls, force=True).run_pipeline(['dataset'])
        with pytest.raises(ConfigurationError, match="stage 'dataset'"):
            make_runner(ExperimentConfig(seed=1), tmp_path, calls).run_pipeline(['extract'])
        assert 'extract' not in calls

        record = make_runner(ExperimentConfig(seed=1), tmp_path, calls, force=True).run_pipeline(['extract'])
        assert record.stage('extract').status is StageStatus.COMPLETED


class TestRealLocalizeStage:

    def test_localize_stage_clusters_spliced_comprints(self, tmp_path):
        config = ExperimentConfig.from_dict({
            'seed': 5,
            'dataset': {'recipes': ['highqf']},
            'localization': {'window': 32, 'stride': 4, 'dim': 6, 'restarts': 2, 'max_iter': 50},
        })
        runner = make_runner(config, tmp_path, Counter())
        extract_dir = tmp_path / "extract" / "highqf"

        def extract():
            return [save_comprint(_spliced_comprint(i, f"img_{i}"), extract_dir / f"img_{i}") for i in range(2)]

        runner._stage_functions['extract'] = extract
        runner._stage_functions['localize'] = runner._run_localize
        record = runner.run_pipeline(['dataset', 'train', 'extract', 'localize'])

        stage = record.stage('localize')
        assert stage.status is StageStatus.COMPLETED
        assert stage.artifact_paths == ["localize/highqf/img_0.npz", "localize/highqf/img_1.npz"]
        for i in range(2):
            path = tmp_path / "localize" / "highqf" / f"img_{i}.npz"
            params = load_heatmap_params(path)
            assert not params['em']['degenerate']
            assert params['em']['iterations'] >= 1
            assert params['image_seed'] == stable_seed(5, f"img_{i}")
            heatmap = load_heatmap(path)
            assert heatmap.shape == (96, 128)
            assert max_mcc(heatmap, composite_mask(heatmap.shape)).best_mcc > 0.5

        again = make_runner(config, tmp_path, Counter())
        again._stage_functions['extract'] = extract
        again._stage_functions['localize'] = again._run_localize
        assert again.run_pipeline(['dataset', 'train', 'extract', 'localize']).stage('localize').status \
            is StageStatus.REUSED
