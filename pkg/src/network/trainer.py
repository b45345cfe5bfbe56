"""Artifact pre-training and Siamese fine-tuning of the fingerprint network."""

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Union

import numpy as np
import torch

from ..utils.error_handler import ConfigurationError, DataError, TrainingDivergedError
from ..utils.logging_config import get_logger
from .checkpoint import save_checkpoint
from .losses import ContrastiveLoss, plane_distance
from .model import FingerprintNet, to_tensor
from .pairs import LabeledImage, PatchPair

logger = get_logger(__name__)


@dataclass
class TrainState:
    """Outcome of a training stage."""

    epoch: int = 0
    pretrain_loss: Optional[float] = None
    siamese_loss: Optional[float] = None
    checkpoint_path: Optional[str] = None
    rng_seed: int = 0
    initial_score: Optional[float] = None
    best_score: Optional[float] = None
    history: List[Dict[str, float]] = field(default_factory=list)

    def __post_init__(self):
        for name in ('pretrain_loss', 'siamese_loss'):
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                raise TrainingDivergedError(f"{name} is not finite: {value}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'epoch': self.epoch,
            'pretrain_loss': self.pretrain_loss,
            'siamese_loss': self.siamese_loss,
            'checkpoint_path': self.checkpoint_path,
            'rng_seed': self.rng_seed,
            'initial_score': self.initial_score,
            'best_score': self.best_score,
            'history': list(self.history),
        }


def _check_finite(loss: torch.Tensor, stage: str, where: str, last_finite: Optional[float]) -> float:
    value = float(loss.detach())
    if not math.isfinite(value):
        raise TrainingDivergedError(
            f"{stage} loss diverged at {where} (value {value}, last finite loss {last_finite})",
            stage=stage, where=where, last_finite_loss=last_finite,
        )
    return value


def _artifact_batches(images: Sequence[LabeledImage], order: Sequence[int], batch_size: int, device: str):
    """Yield (input, target) tensors; images of differing shape go in separate batches."""
    batch: List[LabeledImage] = []
    for index in order:
        image = images[index]
        if batch and (len(batch) == batch_size or image.pixels.shape != batch[0].pixels.shape):
            yield _artifact_tensors(batch, device)
            batch = []
        batch.append(image)
    if batch:
        yield _artifact_tensors(batch, device)


def _artifact_tensors(batch: List[LabeledImage], device: str):
    compressed = np.stack([im.pixels for im in batch])
    original = np.stack([im.original for im in batch])
    x = to_tensor(compressed, device)
    # Artifact target: decoded minus original, in the same [0, 1] units as the input
    return x, x - to_tensor(original, device)


@torch.no_grad()
def artifact_mse(model: FingerprintNet, images: Sequence[LabeledImage], batch_size: int = 8, device: str = "cpu") -> float:
    """Mean squared error between model output and artifact plane."""
    was_training = model.training
    model.eval()
    total, count = 0.0, 0
    for x, target in _artifact_batches(images, range(len(images)), batch_size, device):
        total += float(torch.nn.functional.mse_loss(model(x), target, reduction='sum'))
        count += target.numel()
    model.train(was_training)
    return total / max(count, 1)


def pretrain_artifact_estimator(
    model: FingerprintNet,
    train_set: Sequence[LabeledImage],
    val_set: Sequence[LabeledImage],
    epochs: int,
    seed: int,
    lr: float = 1e-4,
    batch_size: int = 8,
    patience: int = 5,
    checkpoint_path: Optional[Union[str, Path]] = None,
    device: str = "cpu"
) -> TrainState:
    """
    Train the network to predict JPEG artifacts (compressed minus original).

    Keeps the weights with the lowest validation MSE (training MSE when the
    validation set is empty) and stops after `patience` epochs without
    improvement. With epochs=0 the model and any existing checkpoint are
    left untouched.

    Returns:
        TrainState with the best validation loss as pretrain_loss
    """
    for image in list(train_set) + list(val_set):
        if image.original is None:
            raise DataError(f"image '{image.image_id}' has no original counterpart for the artifact target")
    if not train_set:
        raise DataError("pre-training needs at least one training image")

    select_set = val_set if val_set else train_set
    initial = artifact_mse(model, select_set, batch_size, device)
    state = TrainState(epoch=0, pretrain_loss=initial, rng_seed=seed, initial_score=initial, best_score=initial)
    if epochs <= 0:
        return state

    optimizer = torch.optim.Adam([p for p in model.parameters() if p.requires_grad], lr=lr)
    generator = torch.Generator().manual_seed(seed)
    best_state = copy.deepcopy(model.state_dict())
    best_loss, stale, last_finite = initial, 0, None

    for epoch in range(1, epochs + 1):
        model.train()
        order = torch.randperm(len(train_set), generator=generator).tolist()
        running, batches = 0.0, 0
        for x, target in _artifact_batches(train_set, order, batch_size, device):
            optimizer.zero_grad()
            loss = torch.nn.functional.mse_loss(model(x), target)
            last_finite = _check_finite(loss, "pretrain", f"epoch {epoch}", last_finite)
            loss.backward()
            optimizer.step()
            running += last_finite
            batches += 1

        val_loss = artifact_mse(model, select_set, batch_size, device)
        if not math.isfinite(val_loss):
            raise TrainingDivergedError(f"pretrain validation loss diverged at epoch {epoch}",
                                        stage="pretrain", where=f"epoch {epoch}")
        state.history.append({'epoch': epoch, 'train_loss': running / max(batches, 1), 'val_loss': val_loss})
        logger.info(f"pretrain epoch {epoch}/{epochs}: train {running / max(batches, 1):.3e} val {val_loss:.3e}",
                    extra={'stage': 'pretrain', 'epoch': epoch, 'val_loss': val_loss})

        if val_loss < best_loss:
            best_loss, stale = val_loss, 0
            best_state = copy.deepcopy(model.state_dict())
            state.epoch = epoch
        else:
            stale += 1
            if stale >= patience:
                logger.info(f"pretrain early stop at epoch {epoch}")
                break

    model.load_state_dict(best_state)
    model.eval()
    model.training_stage = "pretrained"
    state.pretrain_loss = best_loss
    state.best_score = best_loss
    if checkpoint_path is not None:
        state.checkpoint_path = str(save_checkpoint(model, checkpoint_path, stage="pretrained",
                                                    extra={'val_loss': best_loss, 'epoch': state.epoch}))
    return state


def _pair_tensors(pairs: Sequence[PatchPair], device: str):
    a = to_tensor(np.stack([p.patch_a for p in pairs]), device)
    b = to_tensor(np.stack([p.patch_b for p in pairs]), device)
    same = torch.tensor([p.same_compression for p in pairs], dtype=torch.float32, device=device)
    return a, b, same


def _siamese_forward(model: FingerprintNet, a: torch.Tensor, b: torch.Tensor):
    # One pass over both halves so BatchNorm sees a single batch
    out = model(torch.cat([a, b], dim=0))
    return out[:a.shape[0]], out[a.shape[0]:]


@torch.no_grad()
def pair_distances(model: FingerprintNet, pairs: Sequence[PatchPair], batch_size: int = 64, device: str = "cpu"):
    """Per-pair mean squared plane distance and same-compression labels."""
    was_training = model.training
    model.eval()
    distances, labels = [], []
    for start in range(0, len(pairs), batch_size):
        a, b, same = _pair_tensors(pairs[start:start + batch_size], device)
        out_a, out_b = _siamese_forward(model, a, b)
        distances.append(plane_distance(out_a, out_b).cpu().numpy())
        labels.append(same.cpu().numpy().astype(bool))
    model.train(was_training)
    if not distances:
        return np.zeros(0), np.zeros(0, dtype=bool)
    return np.concatenate(distances), np.concatenate(labels)


def separation_score(model: FingerprintNet, pairs: Sequence[PatchPair], device: str = "cpu") -> float:
    """
    (mean negative distance - mean positive distance) / (their sum).

    Scale-free, in [-1, 1]; positive when different-compression pairs are
    farther apart than same-compression pairs.
    """
    d, same = pair_distances(model, pairs, device=device)
    if not same.any() or same.all():
        raise DataError("separation needs both positive and negative pairs")
    pos, neg = float(d[same].mean()), float(d[~same].mean())
    return (neg - pos) / (neg + pos + 1e-12)


def siamese_finetune(
    model: FingerprintNet,
    pair_stream: Iterator[PatchPair],
    steps: int,
    margin: float,
    seed: int,
    lr: float = 1e-5,
    pairs_per_batch: int = 64,
    val_pairs: Optional[Sequence[PatchPair]] = None,
    eval_interval: int = 50,
    patience: int = 5,
    finetune_layers: Union[str, int] = "all",
    from_scratch: bool = False,
    checkpoint_path: Optional[Union[str, Path]] = None,
    device: str = "cpu"
) -> TrainState:
    """
    Contrastive fine-tuning on patch pairs.

    Every `eval_interval` steps the separation score on `val_pairs` is
    computed; the best-scoring weights are kept, and training stops after
    `patience` evaluations without improvement. With steps=0 the weights
    are unchanged.

    Args:
        model: Pre-trained network (or any network with from_scratch=True)
        pair_stream: Seed-determined pair stream, consumed in order
        steps: Optimizer steps
        margin: Hinge margin on the RMS plane distance (negatives stop at mean squared distance margin^2)
        seed: Recorded in the state; torch randomness is seeded from it
        finetune_layers: 'all' or the number of trailing convolutions to train
        from_scratch: Allow a network that was never pre-trained
    """
    loss_fn = ContrastiveLoss(margin)
    if not from_scratch and getattr(model, 'training_stage', None) not in ('pretrained', 'siamese'):
        raise ConfigurationError("siamese fine-tuning expects a pre-trained model; set from_scratch to train anyway")

    state = TrainState(epoch=0, rng_seed=seed)
    if val_pairs:
        state.initial_score = state.best_score = separation_score(model, val_pairs, device)
    if steps <= 0:
        return state

    model.set_trainable_tail(finetune_layers)
    optimizer = torch.optim.Adam([p for p in model.parameters() if p.requires_grad], lr=lr)
    best_state = copy.deepcopy(model.state_dict())
    best_score = state.best_score if state.best_score is not None else -math.inf
    stale, last_finite, running = 0, None, 0.0

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        for step in range(1, steps + 1):
            model.train()
            batch = [next(pair_stream) for _ in range(pairs_per_batch)]
            a, b, same = _pair_tensors(batch, device)
            optimizer.zero_grad()
            out_a, out_b = _siamese_forward(model, a, b)
            loss = loss_fn(out_a, out_b, same)
            last_finite = _check_finite(loss, "siamese", f"step {step}", last_finite)
            loss.backward()
            optimizer.step()
            running += last_finite

            if step % eval_interval == 0 or step == steps:
                window = eval_interval if step % eval_interval == 0 else step % eval_interval
                record: Dict[str, float] = {'step': step, 'train_loss': running / window}
                running = 0.0
                if val_pairs:
                    score = separation_score(model, val_pairs, device)
                    record['separation'] = score
                    if score > best_score:
                        best_score, stale = score, 0
                        best_state = copy.deepcopy(model.state_dict())
                        state.epoch = step
                    else:
                        stale += 1
                else:
                    best_state = copy.deepcopy(model.state_dict())
                    state.epoch = step
                state.history.append(record)
                logger.info(f"siamese step {step}/{steps}: " +
                            " ".join(f"{k} {v:.4g}" for k, v in record.items() if k != 'step'),
                            extra={'stage': 'siamese', **record})
                if val_pairs and stale >= patience:
                    logger.info(f"siamese early stop at step {step}")
                    break

    model.load_state_dict(best_state)
    model.set_trainable_tail("all")
    model.eval()
    model.training_stage = "siamese"
    state.siamese_loss = last_finite
    state.best_score = best_score if math.isfinite(best_score) else None
    if checkpoint_path is not None:
        state.checkpoint_path = str(save_checkpoint(model, checkpoint_path, stage="siamese",
                                                    extra={'separation': state.best_score, 'step': state.epoch}))
    return state
