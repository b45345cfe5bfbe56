"""
End-to-end pipeline runs.

`slow` runs every stage on a synthetic corpus with a tiny network and
checks that both training stages learn something;
`nightly` reproduces the qualitative trends on a real corpus
(COMPRINT_CORPUS) at desk scale.
"""

import os

import numpy as np
import pytest

from src.config.config_manager import ConfigManager
from src.evaluation.grid import read_grid
from src.evaluation.trends import Verdict, compare_trends
from src.experiment_runner import GRID_FILE, QF_CURVES_FILE, RESULTS_FILE, TRENDS_FILE, ExperimentRunner
from src.forge.codec import jpeg_roundtrip
from src.localization.heatmap import load_heatmap, load_heatmap_params
from src.models.compression import LEFT_QFS, VARIANTS, CompressionChain
from src.models.experiment_config import ExperimentConfig
from src.models.run_record import STAGES, StageStatus
from src.network.model import FingerprintNetConfig, make_model
from src.network.pairs import LabeledImage, sample_pairs, take
from src.network.trainer import pair_distances, pretrain_artifact_estimator, siamese_finetune

# read at import, before the fixtures scrub COMPRINT_* variables
NIGHTLY_CORPUS = os.environ.get('COMPRINT_CORPUS')

TINY = {
    'seed': 1,
    'dataset': {'train': 6, 'val': 2, 'test': 1, 'train_size': 32, 'test_size': 64},
    'model': {
        'depth': 3, 'width': 8, 'pretrain_epochs': 1, 'pretrain_batch': 2,
        'siamese_steps': 4, 'pairs_per_batch': 4, 'patch_size': 16, 'eval_interval': 2,
        'val_pairs': 8, 'tile': 64, 'overlap': 16,
    },
    'localization': {'window': 32, 'stride': 4, 'dim': 4, 'restarts': 1, 'max_iter': 20},
    'evaluation': {'thresholds': 32},
}


@pytest.mark.slow
def test_every_stage_on_a_synthetic_corpus(tmp_path, make_corpus):
    corpus = make_corpus(n=10)
    config = ExperimentConfig.from_dict({**TINY, 'dataset': {**TINY['dataset'], 'corpus': str(corpus)}})
    runner = ExperimentRunner(config, run_dir=tmp_path / "run")
    record = runner.run_pipeline()
    assert all(record.stage(s).status is StageStatus.COMPLETED for s in STAGES)

    grid = read_grid(tmp_path / "run" / "evaluate" / GRID_FILE)
    assert grid.models == ["HighQF", "HighQFRec", "WideQF"]
    assert len(grid) == 3 * len(LEFT_QFS) * len(VARIANTS)
    assert grid.missing_cells() == []
    assert (tmp_path / "run" / "plot" / QF_CURVES_FILE).is_file()
    assert (tmp_path / "run" / "plot" / TRENDS_FILE).is_file()

    localized = sorted((tmp_path / "run" / "localize").glob("*/*.npz"))
    assert len(localized) == 3 * len(LEFT_QFS) * len(VARIANTS)
    fitted = [p for p in localized if not load_heatmap_params(p)['em']['degenerate']]
    assert fitted, "EM was skipped on every heatmap"
    assert all(load_heatmap_params(p)['em']['iterations'] >= 1 for p in fitted)
    assert any(np.ptp(load_heatmap(p).values) > 0 for p in fitted)

    again = ExperimentRunner(config, run_dir=tmp_path / "run").run_pipeline()
    assert all(again.stage(s).status is StageStatus.REUSED for s in STAGES)

    ExperimentRunner(config, run_dir=tmp_path / "twin").run_pipeline(['dataset', 'train', 'extract',
                                                                       'localize', 'evaluate'])
    for name in (RESULTS_FILE, GRID_FILE):
        assert (tmp_path / "twin" / "evaluate" / name).read_bytes() == \
            (tmp_path / "run" / "evaluate" / name).read_bytes()


@pytest.mark.nightly
@pytest.mark.skipif(not NIGHTLY_CORPUS, reason="needs COMPRINT_CORPUS")
def test_desk_profile_reproduces_the_trends(tmp_path):
    config = ConfigManager(profile='desk', overrides={'dataset': {'corpus': NIGHTLY_CORPUS}}).get_config()
    ExperimentRunner(config, run_dir=tmp_path / "desk").run_pipeline()
    report = compare_trends(read_grid(tmp_path / "desk" / "evaluate" / GRID_FILE))
    assert report.get('high_pair_beats_low_pair').verdict is Verdict.PASS
    assert report.get('rec90_robust').verdict is Verdict.PASS


def _chain_images(smooth_image, qfs, first_seed):
    images = []
    for i, qf in enumerate(qfs):
        original = smooth_image(first_seed + i, (64, 64), sigma=1.5)
        images.append(LabeledImage(f"img_{first_seed + i}", jpeg_roundtrip(original, qf),
                                   CompressionChain((qf,)), original))
    return images


@pytest.mark.slow
def test_pretraining_beats_the_untrained_baseline(smooth_image):
    images = _chain_images(smooth_image, [30, 50, 70, 90] * 6, 300)
    model = make_model(FingerprintNetConfig(depth=5, width=16), seed=0)
    state = pretrain_artifact_estimator(model, images[:20], images[20:], epochs=6, seed=0,
                                        lr=1e-3, batch_size=4)
    assert state.pretrain_loss < state.initial_score


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_siamese_separates_two_chains(smooth_image, seed):
    train = _chain_images(smooth_image, [30, 95] * 6, 400)
    held_out = _chain_images(smooth_image, [30, 95] * 3, 500)
    model = make_model(FingerprintNetConfig(depth=5, width=16), seed=seed)
    pretrain_artifact_estimator(model, train, [], epochs=4, seed=seed, lr=1e-3, batch_size=4)
    stream = sample_pairs(train, (16, 0.5), seed=seed, patch_size=32)
    val_pairs = take(sample_pairs(train, (16, 0.5), seed=seed + 50, patch_size=32), 64)
    state = siamese_finetune(model, stream, steps=120, margin=1.0, seed=seed, lr=1e-3, pairs_per_batch=16,
                             val_pairs=val_pairs, eval_interval=20)
    assert state.best_score > state.initial_score

    distances, same = pair_distances(model, take(sample_pairs(held_out, (16, 0.5), seed=seed + 100,
                                                              patch_size=32), 256))
    assert distances[~same].mean() > distances[same].mean()
