"""Tests for the fingerprint network, pair sampling, training and extraction."""

import math

import numpy as np
import pytest
import torch

from src.forge.codec import jpeg_roundtrip
from src.models.compression import CompressionChain
from src.models.dataset import SourceImage
from src.network.checkpoint import load_checkpoint, save_checkpoint
from src.network.extraction import (
    extract_comprint, load_comprint, save_comprint, tile_starts, to_visualization
)
from src.network.losses import ContrastiveLoss, plane_distance
from src.network.model import FingerprintNet, FingerprintNetConfig, make_model, to_tensor
from src.network.pairs import LabeledImage, group_by_chain, sample_pairs, take
from src.network.trainer import (
    TrainState, artifact_mse, pretrain_artifact_estimator, separation_score, siamese_finetune
)
from src.utils.error_handler import (
    ConfigurationError, DataError, ErrorHandler, MissingArtifactError, TrainingDivergedError, ValidationError
)

TINY = FingerprintNetConfig(depth=3, width=4)


@pytest.fixture
def labeled_images(smooth_image):
    """Six 48x48 images in three single-step chains, each with its original."""
    images = []
    for i, qf in enumerate([30, 30, 60, 60, 90, 90]):
        original = smooth_image(200 + i, (48, 48), sigma=1.5)
        images.append(LabeledImage(f"img_{i}", jpeg_roundtrip(original, qf), CompressionChain((qf,)), original))
    return images


class TestModel:

    def test_output_shape_matches_input(self):
        model = make_model(TINY, seed=0)
        x = to_tensor(np.zeros((2, 37, 41), dtype=np.uint8))
        assert x.shape == (2, 1, 37, 41)
        assert model(x).shape == (2, 1, 37, 41)

    def test_receptive_field(self):
        assert FingerprintNetConfig(depth=17, width=64).receptive_field == 35

    def test_same_seed_same_weights(self):
        a, b = make_model(TINY, seed=3), make_model(TINY, seed=3)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)
        c = make_model(TINY, seed=4)
        assert not all(torch.equal(pa, pc) for pa, pc in zip(a.parameters(), c.parameters()))

    def test_global_rng_is_untouched(self):
        state = torch.get_rng_state()
        make_model(TINY, seed=99)
        assert torch.equal(state, torch.get_rng_state())

    def test_trainable_tail(self):
        model = FingerprintNet(FingerprintNetConfig(depth=4, width=4))
        assert len(model.conv_blocks()) == 4
        last_conv = model.conv_blocks()[-1][0]
        n = model.set_trainable_tail(1)
        assert n == sum(p.numel() for p in last_conv.parameters())
        model.set_trainable_tail("all")
        assert all(p.requires_grad for p in model.parameters())
        with pytest.raises(ConfigurationError):
            model.set_trainable_tail(0)

    def test_invalid_shapes(self):
        with pytest.raises(ConfigurationError):
            FingerprintNetConfig(depth=1)
        with pytest.raises(ConfigurationError):
            FingerprintNetConfig(kernel=2)


class TestContrastiveLoss:

    def test_positive_pairs_cost_their_distance(self):
        a = torch.zeros(1, 1, 4, 4)
        b = torch.full((1, 1, 4, 4), 0.5)
        assert float(plane_distance(a, b)) == pytest.approx(0.25)
        loss = ContrastiveLoss(margin=1.0)
        assert float(loss(a, b, torch.tensor([1.0]))) == pytest.approx(0.25)
        assert float(loss(a, a, torch.tensor([1.0]))) == 0.0

    def test_negative_pairs_hinge_at_margin(self):
        loss = ContrastiveLoss(margin=1.0)
        a = torch.zeros(1, 1, 4, 4)
        assert float(loss(a, a, torch.tensor([0.0]))) == pytest.approx(1.0)
        far = torch.full((1, 1, 4, 4), 2.0)
        assert float(loss(a, far, torch.tensor([0.0]))) == 0.0

    def test_negative_hinge_uses_the_rms_distance(self):
        a = torch.zeros(1, 1, 4, 4)
        b = torch.full((1, 1, 4, 4), 0.5)
        loss = ContrastiveLoss(margin=1.0)
        # D = 0.5, so (1 - D)^2; the positive cost of the same pair is D^2
        assert float(loss(a, b, torch.tensor([0.0]))) == pytest.approx(0.25)
        assert float(loss(a, b, torch.tensor([1.0]))) == pytest.approx(0.25)
        assert float(ContrastiveLoss(margin=2.0)(a, b, torch.tensor([0.0]))) == pytest.approx(2.25)

    def test_gradients_stay_finite_for_identical_planes(self):
        a = torch.zeros(2, 1, 4, 4, requires_grad=True)
        loss = ContrastiveLoss(margin=1.0)(a, torch.zeros(2, 1, 4, 4), torch.tensor([0.0, 1.0]))
        loss.backward()
        assert torch.isfinite(a.grad).all()

    def test_margin_must_be_positive(self):
        with pytest.raises(ConfigurationError):
            ContrastiveLoss(margin=0.0)


class TestPairSampling:

    def test_stream_is_seed_determined(self, labeled_images):
        a = take(sample_pairs(labeled_images, (16, 0.5), seed=1, patch_size=16), 40)
        b = take(sample_pairs(labeled_images, (16, 0.5), seed=1, patch_size=16), 40)
        assert all(np.array_equal(x.patch_a, y.patch_a) and x.same_compression == y.same_compression
                   for x, y in zip(a, b))
        c = take(sample_pairs(labeled_images, (16, 0.5), seed=2, patch_size=16), 40)
        assert any(not np.array_equal(x.patch_a, y.patch_a) for x, y in zip(a, c))

    def test_each_batch_has_the_exact_positive_count(self, labeled_images):
        stream = sample_pairs(labeled_images, (10, 0.3), seed=0, patch_size=16)
        for _ in range(5):
            batch = take(stream, 10)
            assert sum(p.same_compression for p in batch) == 3

    def test_labels_follow_chain_equality(self, labeled_images):
        for pair in take(sample_pairs(labeled_images, (8, 0.5), seed=4, patch_size=16), 64):
            assert pair.same_compression == (pair.chain_a == pair.chain_b)
            assert pair.patch_a.shape == (16, 16)

    def test_aligned_patches_sit_on_the_jpeg_grid(self, labeled_images):
        image = labeled_images[0]
        offsets = {(r, c) for r in range(0, 33) for c in range(0, 33)}
        aligned = {(r, c) for r, c in offsets if r % 8 == 0 and c % 8 == 0}
        single = [image]
        other = LabeledImage("other", image.pixels, CompressionChain((99,)))
        for pair in take(sample_pairs(single + [other], (8, 0.5), seed=3, patch_size=16), 32):
            found = {(r, c) for r, c in offsets
                     if np.array_equal(image.pixels[r:r + 16, c:c + 16], pair.patch_a)}
            assert found & aligned

    def test_one_chain_cannot_form_negatives(self, labeled_images):
        with pytest.raises(DataError):
            sample_pairs(labeled_images[:2], (8, 0.5), seed=0, patch_size=16)

    def test_patch_larger_than_image(self, labeled_images):
        with pytest.raises(DataError):
            sample_pairs(labeled_images, (8, 0.5), seed=0, patch_size=64)

    def test_group_by_chain(self, labeled_images):
        groups = group_by_chain(labeled_images)
        assert [chain.steps for chain, _ in groups] == [(30,), (60,), (90,)]
        assert all(len(members) == 2 for _, members in groups)


class TestTraining:

    def test_zero_epochs_leave_weights_unchanged(self, labeled_images):
        model = make_model(TINY, seed=0)
        before = {k: v.clone() for k, v in model.state_dict().items()}
        state = pretrain_artifact_estimator(model, labeled_images[:4], labeled_images[4:], epochs=0, seed=0)
        assert state.epoch == 0
        assert state.pretrain_loss == pytest.approx(artifact_mse(model, labeled_images[4:]))
        for key, value in model.state_dict().items():
            assert torch.equal(value, before[key])

    def test_pretrain_keeps_the_best_validation_loss(self, labeled_images, tmp_path):
        model = make_model(TINY, seed=0)
        state = pretrain_artifact_estimator(model, labeled_images[:4], labeled_images[4:], epochs=3, seed=0,
                                            lr=1e-3, batch_size=2, checkpoint_path=tmp_path / "pre.pt")
        assert state.pretrain_loss <= state.initial_score
        assert len(state.history) >= 1
        assert model.training_stage == "pretrained"
        assert (tmp_path / "pre.pt").is_file()

    def test_pretrain_needs_originals(self, labeled_images):
        bare = [LabeledImage(i.image_id, i.pixels, i.chain) for i in labeled_images]
        with pytest.raises(DataError):
            pretrain_artifact_estimator(make_model(TINY, 0), bare, [], epochs=1, seed=0)

    def test_non_finite_loss_is_an_error(self):
        with pytest.raises(TrainingDivergedError):
            TrainState(pretrain_loss=math.nan)
        assert ErrorHandler.exit_code_for(TrainingDivergedError("x")) == 3

    def test_siamese_requires_pretraining(self, labeled_images):
        stream = sample_pairs(labeled_images, (8, 0.5), seed=0, patch_size=16)
        with pytest.raises(ConfigurationError, match="pre-trained"):
            siamese_finetune(make_model(TINY, 0), stream, steps=1, margin=1.0, seed=0)

    def test_siamese_zero_steps(self, labeled_images):
        model = make_model(TINY, 0)
        before = {k: v.clone() for k, v in model.state_dict().items()}
        stream = sample_pairs(labeled_images, (8, 0.5), seed=0, patch_size=16)
        state = siamese_finetune(model, stream, steps=0, margin=1.0, seed=0, from_scratch=True)
        assert state.siamese_loss is None
        for key, value in model.state_dict().items():
            assert torch.equal(value, before[key])

    def test_siamese_never_ends_below_its_starting_score(self, labeled_images, tmp_path):
        model = make_model(TINY, 0)
        model.training_stage = "pretrained"
        stream = sample_pairs(labeled_images, (8, 0.5), seed=0, patch_size=16)
        val_pairs = take(sample_pairs(labeled_images, (8, 0.5), seed=9, patch_size=16), 32)
        state = siamese_finetune(model, stream, steps=6, margin=1.0, seed=0, lr=1e-3, pairs_per_batch=8,
                                 val_pairs=val_pairs, eval_interval=2, finetune_layers=1,
                                 checkpoint_path=tmp_path / "final.pt")
        assert state.best_score >= state.initial_score
        assert state.best_score == pytest.approx(separation_score(model, val_pairs))
        assert math.isfinite(state.siamese_loss)
        assert all(p.requires_grad for p in model.parameters())
        assert load_checkpoint(tmp_path / "final.pt")[1]['stage'] == "siamese"

    def test_same_seed_same_training(self, labeled_images):
        results = []
        for _ in range(2):
            model = make_model(TINY, 0)
            model.training_stage = "pretrained"
            stream = sample_pairs(labeled_images, (8, 0.5), seed=0, patch_size=16)
            siamese_finetune(model, stream, steps=3, margin=1.0, seed=0, lr=1e-3, pairs_per_batch=8)
            results.append(model.state_dict())
        for key in results[0]:
            assert torch.equal(results[0][key], results[1][key])


class TestCheckpoint:

    def test_reload_gives_identical_outputs(self, tmp_path):
        model = make_model(TINY, seed=5)
        model.training_stage = "siamese"
        path = save_checkpoint(model, tmp_path / "m.pt", stage="siamese", tag="HighQF", extra={'separation': 0.3})
        loaded, meta = load_checkpoint(path)
        assert meta['tag'] == "HighQF"
        assert meta['config'] == TINY.to_dict()
        assert loaded.training_stage == "siamese"
        x = to_tensor((np.arange(400) % 256).astype(np.uint8).reshape(20, 20))
        with torch.no_grad():
            assert torch.equal(model.eval()(x), loaded(x))

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(MissingArtifactError) as info:
            load_checkpoint(tmp_path / "none.pt")
        assert ErrorHandler.exit_code_for(info.value) == 2


class TestExtraction:

    def test_tile_starts(self):
        assert tile_starts(100, 200, 32) == ([0], 200)
        assert tile_starts(200, 200, 32) == ([0], 200)
        starts, padded = tile_starts(400, 200, 32)
        assert starts == [0, 168, 336]
        assert padded == 536
        assert starts[-1] + 200 == padded

    def test_comprint_covers_the_image(self, smooth_image):
        model = make_model(TINY, seed=0)
        image = SourceImage("a", smooth_image(1, (70, 90)))
        comprint = extract_comprint(model, image, tile=32, overlap=8, model_tag="t")
        assert comprint.shape == (70, 90)
        assert comprint.values.dtype == np.float32
        assert np.isfinite(comprint.values).all()
        again = extract_comprint(model, image, tile=32, overlap=8)
        assert np.array_equal(comprint.values, again.values)

    def test_single_tile_equals_a_full_forward_pass(self, smooth_image):
        model = make_model(TINY, seed=0)
        image = SourceImage("a", smooth_image(2, (64, 64)))
        comprint = extract_comprint(model, image, tile=64, overlap=0)
        with torch.no_grad():
            direct = model(to_tensor(image.pixels))[0, 0].numpy()
        np.testing.assert_allclose(comprint.values, direct, rtol=1e-5, atol=1e-6)

    def test_short_image_is_padded_to_one_tile(self, smooth_image):
        model = make_model(TINY, seed=0)
        image = SourceImage("a", smooth_image(2, (40, 50)))
        comprint = extract_comprint(model, image, tile=64, overlap=8)
        assert comprint.shape == (40, 50)
        padded = np.pad(image.pixels, ((0, 24), (0, 14)), mode='reflect')
        with torch.no_grad():
            direct = model(to_tensor(padded))[0, 0].numpy()[:40, :50]
        np.testing.assert_allclose(comprint.values, direct, rtol=1e-5, atol=1e-6)

    def test_tile_larger_than_the_padded_image(self, smooth_image):
        with pytest.raises(ValidationError, match="larger than the reflect-padded image"):
            extract_comprint(make_model(TINY, 0), SourceImage("a", smooth_image(1, (30, 80))), tile=64, overlap=8)

    def test_invalid_tiling(self, smooth_image):
        with pytest.raises(ValidationError):
            extract_comprint(make_model(TINY, 0), SourceImage("a", smooth_image(1, (40, 40))), tile=8, overlap=8)

    def test_save_and_load(self, tmp_path, smooth_image):
        comprint = extract_comprint(make_model(TINY, 0), SourceImage("cat", smooth_image(3, (32, 32))),
                                    tile=32, overlap=0, model_tag="HighQF")
        path = save_comprint(comprint, tmp_path / "cat")
        assert path.name == "cat.npz"
        assert (tmp_path / "cat.png").is_file()
        loaded = load_comprint(path)
        assert loaded.source_id == "cat"
        assert loaded.model_tag == "HighQF"
        assert np.array_equal(loaded.values, comprint.values)

    def test_visualization_of_constant_plane(self):
        assert (to_visualization(np.zeros((3, 3))) == 128).all()
        scaled = to_visualization(np.array([[0.0, 1.0]]))
        assert scaled.tolist() == [[0, 255]]
