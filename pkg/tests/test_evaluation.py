"""Tests for MCC scoring, result grids, the evaluator, figures and trend checks."""

import decimal

import numpy as np
import pandas as pd
import pytest
import yaml
from PIL import Image

from src.evaluation.evaluator import Evaluator
from src.evaluation.grid import aggregate_grid, read_grid, read_results, write_grid, write_results
from src.evaluation.metrics import candidate_thresholds, confusion_counts, max_mcc, mcc, pooled_max_mcc
from src.evaluation.plots import plot_qf_curves, plot_recompression_matrix
from src.evaluation.trends import Verdict, compare_trends
from src.forge.composites import composite_mask
from src.localization.heatmap import Heatmap, save_heatmap
from src.models.compression import LEFT_QFS, LOSSLESS_VARIANT, CompositeSpec
from src.models.dataset import DatasetManifest, ManifestEntry
from src.models.experiment_config import EvaluationSection
from src.models.results import ConfusionCounts, GridCell, ImageResult, ResultGrid
from src.utils.error_handler import ConfigurationError, MissingArtifactError, ValidationError

MASK = composite_mask((8, 8))


class TestMcc:

    def test_known_value(self):
        assert mcc(ConfusionCounts(tp=3, tn=2, fp=1, fn=1)) == pytest.approx(5 / 12)

    def test_matches_exact_arithmetic(self):
        rng = np.random.default_rng(0)
        context = decimal.Context(prec=60)
        for tp, tn, fp, fn in rng.integers(0, 10 ** 6, size=(1000, 4)).tolist():
            denominator = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
            expected = context.divide(decimal.Decimal(tp * tn - fp * fn), context.sqrt(decimal.Decimal(denominator)))
            assert abs(mcc(ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)) - float(expected)) <= 1e-12

    def test_zero_marginal(self):
        assert mcc(ConfusionCounts(tp=0, tn=10, fp=0, fn=5)) == 0.0
        assert mcc(ConfusionCounts(tp=4, tn=0, fp=4, fn=0)) == 0.0

    def test_swapping_classes_keeps_the_score(self):
        counts = ConfusionCounts(tp=7, tn=11, fp=2, fn=3)
        assert mcc(counts.swapped()) == pytest.approx(mcc(counts))
        assert mcc(counts.inverted()) == pytest.approx(-mcc(counts))

    def test_confusion_counts(self):
        values = MASK.astype(float)
        assert confusion_counts(values, MASK, 0.5) == ConfusionCounts(tp=32, tn=32, fp=0, fn=0)
        assert confusion_counts(values, MASK, -0.5, polarity=-1) == ConfusionCounts(tp=0, tn=0, fp=32, fn=32)


class TestMaxMcc:

    def test_perfect_heatmap(self):
        curve = max_mcc(MASK.astype(float), MASK)
        assert curve.best_mcc == pytest.approx(1.0)
        assert curve.polarity == 1

    def test_inverted_heatmap_uses_negative_polarity(self):
        curve = max_mcc(Heatmap(values=1.0 - MASK, source_id="x"), MASK)
        assert curve.best_mcc == pytest.approx(1.0)
        assert curve.polarity == -1

    def test_random_heatmap_scores_near_zero(self):
        values = np.random.default_rng(0).random((400, 400))
        assert max_mcc(values, composite_mask((400, 400))).best_mcc < 0.05

    def test_constant_heatmap(self):
        assert max_mcc(np.zeros((8, 8)), MASK).best_mcc == 0.0

    def test_negation_invariance(self):
        rng = np.random.default_rng(1)
        values = MASK + rng.normal(scale=0.8, size=MASK.shape)
        assert max_mcc(values, MASK).best_mcc == pytest.approx(max_mcc(-values, MASK).best_mcc)

    def test_thresholds_are_closed_under_negation(self):
        values = np.random.default_rng(2).normal(size=100)
        thresholds = candidate_thresholds(values, 16)
        np.testing.assert_allclose(np.sort(-thresholds), thresholds)
        assert thresholds[0] == -np.inf and thresholds[-1] == np.inf

    def test_exhaustive_is_never_worse(self):
        rng = np.random.default_rng(3)
        mask = composite_mask((16, 16))
        values = mask + rng.normal(scale=1.0, size=mask.shape)
        coarse = max_mcc(values, mask, n_thresholds=4)
        exact = max_mcc(values, mask, exhaustive=True)
        assert exact.best_mcc >= coarse.best_mcc - 1e-12

    def test_invalid_inputs(self):
        with pytest.raises(ValidationError):
            max_mcc(np.zeros((8, 6)), MASK)
        bad = np.zeros((8, 8))
        bad[0, 0] = np.nan
        with pytest.raises(ValidationError):
            max_mcc(bad, MASK)
        with pytest.raises(ValidationError):
            max_mcc(np.zeros((8, 8)), MASK, n_thresholds=1)

    def test_pooled_shares_one_threshold(self):
        first = MASK.astype(float)
        second = MASK + 10.0
        assert max_mcc(second, MASK).best_mcc == pytest.approx(1.0)
        pooled = pooled_max_mcc([first, second], [MASK, MASK])
        assert pooled.best_mcc < 1.0
        assert pooled_max_mcc([first, first], [MASK, MASK]).best_mcc == pytest.approx(1.0)
        with pytest.raises(ValidationError):
            pooled_max_mcc([first], [MASK, MASK])


def _result(source, value, qf=20, variant=LOSSLESS_VARIANT, model="HighQF"):
    return ImageResult(model=model, source_id=source, left_qf=qf, variant=variant, best_mcc=value)


class TestGrid:

    def test_cell_statistics(self):
        grid = aggregate_grid([_result("a", 0.2), _result("b", 0.4), _result("c", 0.6)])
        cell = grid.get("HighQF", 20, LOSSLESS_VARIANT)
        assert cell.count == 3
        assert cell.mean == pytest.approx(0.4)
        assert cell.std == pytest.approx(0.2)
        assert grid.get("HighQF", 25, LOSSLESS_VARIANT) is None

    def test_order_does_not_matter(self):
        results = [_result(f"s{i}", v) for i, v in enumerate(np.random.default_rng(4).random(50))]
        assert aggregate_grid(results) == aggregate_grid(results[::-1])

    def test_duplicates_are_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            aggregate_grid([_result("a", 0.2), _result("a", 0.3)])

    def test_tables_round_trip(self, tmp_path):
        results = [_result("a", 1 / 3), _result("b", 0.1, variant="rec90"), _result("a", -0.25, qf=90)]
        write_results(results, tmp_path / "results.csv")
        assert sorted(read_results(tmp_path / "results.csv"), key=str) == sorted(results, key=str)

        grid = aggregate_grid(results)
        write_grid(grid, tmp_path / "grid.csv")
        assert read_grid(tmp_path / "grid.csv") == grid
        frame = pd.read_csv(tmp_path / "grid.csv")
        assert list(frame['right_qf']) == [30, 30, 100]


def _write_suite(root, sources=("a", "b"), variants=(None, 90), shape=(16, 16)):
    """Hand-built test manifest with one mask per source."""
    entries = []
    for source in sources:
        mask_rel = f"test/{source}/mask.png"
        (root / "test" / source).mkdir(parents=True)
        Image.fromarray(composite_mask(shape) * 255, mode='L').save(root / mask_rel)
        for rec in variants:
            spec = CompositeSpec(left_qf=20, source_id=source, recompress_qf=rec)
            entries.append(ManifestEntry(image_id=spec.entry_id, role='test', path=f"test/{source}/x.png",
                                         checksum="0", composite=spec, mask_path=mask_rel))
    return DatasetManifest(seed=0, recipe_name="test-suite", entries=entries)


class TestEvaluator:

    def _heatmaps(self, manifest, out, shape=(16, 16)):
        rng = np.random.default_rng(5)
        for entry in manifest.entries:
            if entry.composite.source_id == "a":
                values = composite_mask(shape).astype(float)
            else:
                values = rng.normal(size=shape)
            save_heatmap(Heatmap(values=values, source_id=entry.image_id), out / entry.image_id)

    def test_per_image(self, tmp_path):
        manifest = _write_suite(tmp_path)
        self._heatmaps(manifest, tmp_path / "heatmaps")
        results, grid = Evaluator(workers=2).evaluate(tmp_path / "heatmaps", manifest, tmp_path, "HighQF")
        assert len(results) == 4
        perfect = [r for r in results if r.source_id == "a"]
        assert all(r.best_mcc == pytest.approx(1.0) for r in perfect)
        cell = grid.get("HighQF", 20, LOSSLESS_VARIANT)
        assert cell.count == 2
        assert grid.get("HighQF", 20, "rec90").count == 2
        assert 0.5 < cell.mean <= 1.0

    def test_pooled(self, tmp_path):
        manifest = _write_suite(tmp_path)
        self._heatmaps(manifest, tmp_path / "heatmaps")
        evaluator = Evaluator(EvaluationSection(pooling='pooled'))
        _, grid = evaluator.evaluate(tmp_path / "heatmaps", manifest, tmp_path, "HighQF")
        cell = grid.get("HighQF", 20, LOSSLESS_VARIANT)
        assert cell.count == 2
        assert cell.std == 0.0

    def test_missing_heatmap(self, tmp_path):
        manifest = _write_suite(tmp_path)
        self._heatmaps(manifest, tmp_path / "heatmaps")
        (tmp_path / "heatmaps" / "b__q20_rec90.npz").unlink()
        with pytest.raises(MissingArtifactError, match="run 'localize' first"):
            Evaluator().evaluate(tmp_path / "heatmaps", manifest, tmp_path, "HighQF")


def _score(model, qf, variant, rec_bonus=0.1, lossless_bonus=0.1, wide_slope=1.0):
    base = 0.2 + qf / 200
    if model == "WideQF":
        return 0.2 + wide_slope * (qf - 55) / 200 + 0.225
    if model == "HighQFRec":
        return base + (lossless_bonus if variant == LOSSLESS_VARIANT else rec_bonus)
    return base + 0.05


class TestPlots:

    def test_qf_curves(self, tmp_path, full_grid):
        png, csv = plot_qf_curves(full_grid(_score), tmp_path / "figures" / "qf_curves.png")
        assert png.is_file() and csv.is_file()
        table = pd.read_csv(csv, index_col=0)
        assert list(table.index) == ["HighQF", "HighQFRec", "WideQF"]
        assert table.shape == (3, len(LEFT_QFS))
        assert table.loc["HighQF"].iloc[0] == pytest.approx(_score("HighQF", 20, LOSSLESS_VARIANT))

    def test_empty_grid(self, tmp_path):
        with pytest.raises(ValidationError):
            plot_qf_curves(ResultGrid(), tmp_path / "x.png")

    def test_recompression_matrix_marks_missing_cells(self, tmp_path, full_grid):
        grid = full_grid(_score)
        del grid.cells[("HighQFRec", 45, "rec60")]
        png, csv = plot_recompression_matrix(grid, "HighQFRec", tmp_path / "rec.png")
        assert png.is_file()
        table = pd.read_csv(csv, index_col=0)
        assert table.shape == (8, 15)
        assert np.isnan(table.loc["rec60", "45/55"])
        assert table.isna().sum().sum() == 1

    def test_recompression_matrix_errors(self, tmp_path):
        lossless_only = ResultGrid(cells={("HighQF", 20, LOSSLESS_VARIANT): GridCell(mean=0.5, count=1)})
        with pytest.raises(ConfigurationError, match="unknown model"):
            plot_recompression_matrix(lossless_only, "WideQF", tmp_path / "rec.png")
        with pytest.raises(ValidationError):
            plot_recompression_matrix(lossless_only, "HighQF", tmp_path / "rec.png")


class TestTrends:

    def test_all_claims_pass(self, full_grid):
        report = compare_trends(full_grid(_score))
        assert report.failed == []
        assert all(c.verdict is Verdict.PASS for c in report.claims)
        assert len(report.claims) == 6

    def test_lossless_cost_is_permitted(self, full_grid):
        report = compare_trends(full_grid(lambda m, qf, v: _score(m, qf, v, lossless_bonus=0.0)))
        assert report.get('rec_lossless_cost').verdict is Verdict.PERMITTED
        assert report.failed == []

    def test_falling_curve_fails(self, full_grid):
        report = compare_trends(full_grid(lambda m, qf, v: _score(m, qf, v, wide_slope=-1.0)))
        assert report.get('rises_with_qf').verdict is Verdict.FAIL
        assert report.get('rises_with_qf').details['rank_correlation']['WideQF'] == pytest.approx(-1.0)
        assert report.failed == ['rises_with_qf']

    def test_recompression_regression_fails(self, full_grid):
        report = compare_trends(full_grid(lambda m, qf, v: _score(m, qf, v, rec_bonus=0.0)))
        assert report.get('rec_robust').verdict is Verdict.FAIL
        assert 'rec90_robust' in report.failed

    def test_missing_models_are_not_evaluable(self, full_grid):
        report = compare_trends(full_grid(_score, models=("HighQF",)))
        assert report.get('rises_with_qf').verdict is Verdict.PASS
        assert report.get('wide_not_better_high_pairs').verdict is Verdict.NOT_EVALUABLE
        assert report.get('rec_robust').verdict is Verdict.NOT_EVALUABLE
        assert report.failed == []

    def test_save(self, tmp_path, full_grid):
        path = compare_trends(full_grid(_score)).save(tmp_path / "trends.yaml")
        data = yaml.safe_load(path.read_text(encoding='utf-8'))
        assert data['failed'] == []
        assert [c['verdict'] for c in data['claims']] == ['pass'] * 6
