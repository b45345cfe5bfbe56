"""Per-recipe training and per-manifest extraction, as used by the runner and CLI."""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from ..forge.codec import load_pixels
from ..forge.corpus import assign_ids, find_images, load_image_file
from ..models.dataset import DatasetManifest, SourceImage
from ..models.experiment_config import ModelSection
from ..utils.batch_processor import BatchProcessor
from ..utils.error_handler import DataError
from ..utils.hashing import stable_seed
from ..utils.logging_config import get_logger
from .checkpoint import load_checkpoint, save_checkpoint
from .extraction import extract_comprint, save_comprint
from .model import FingerprintNetConfig, make_model
from .pairs import load_labeled_images, sample_pairs, take
from .trainer import pretrain_artifact_estimator, siamese_finetune

logger = get_logger(__name__)

PRETRAIN_CHECKPOINT = "pretrain.pt"
FINAL_CHECKPOINT = "comprint.pt"


def net_config(section: ModelSection) -> FingerprintNetConfig:
    return FingerprintNetConfig(depth=section.depth, width=section.width,
                                kernel=section.kernel, residual_head=section.residual_head)


def train_recipe(
    manifest: DatasetManifest,
    root: Union[str, Path],
    section: ModelSection,
    seed: int,
    out_dir: Union[str, Path],
    stages: tuple = ('pretrain', 'siamese')
) -> Dict[str, Any]:
    """
    Pre-train and fine-tune one model on a recipe's training manifest.

    Writes `pretrain.pt`, `comprint.pt` and `train_state.json` to `out_dir`.
    With only 'siamese' requested, an existing `pretrain.pt` is loaded.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tag = manifest.recipe_name
    train_images = load_labeled_images(manifest, root, 'train')
    val_images = load_labeled_images(manifest, root, 'val')
    summary: Dict[str, Any] = {'recipe': tag, 'seed': seed}

    if 'pretrain' in stages:
        model = make_model(net_config(section), seed, section.device)
        if not section.from_scratch:
            state = pretrain_artifact_estimator(
                model, train_images, val_images, epochs=section.pretrain_epochs, seed=seed,
                lr=section.pretrain_lr, batch_size=section.pretrain_batch, patience=section.patience,
                device=section.device,
            )
            summary['pretrain'] = state.to_dict()
            # Zero epochs still count as the (trivial) pre-training stage
            model.training_stage = "pretrained"
        save_checkpoint(model, out_dir / PRETRAIN_CHECKPOINT, stage=model.training_stage, tag=tag)
    else:
        model, _ = load_checkpoint(out_dir / PRETRAIN_CHECKPOINT, section.device)

    if 'siamese' in stages:
        stream = sample_pairs(train_images, (section.pairs_per_batch, section.positive_fraction),
                              seed=stable_seed(seed, f"{tag}:pairs"),
                              patch_size=section.patch_size, align_to_grid=section.align_to_grid)
        val_pairs = _validation_pairs(val_images, train_images, section, stable_seed(seed, f"{tag}:val-pairs"))
        state = siamese_finetune(
            model, stream, steps=section.siamese_steps, margin=section.margin, seed=seed,
            lr=section.siamese_lr, pairs_per_batch=section.pairs_per_batch, val_pairs=val_pairs,
            eval_interval=section.eval_interval, patience=section.patience,
            finetune_layers=section.finetune_layers, from_scratch=section.from_scratch,
            device=section.device,
        )
        summary['siamese'] = state.to_dict()
        save_checkpoint(model, out_dir / FINAL_CHECKPOINT, stage=model.training_stage, tag=tag,
                        extra={'separation': state.best_score})

    with open(out_dir / "train_state.json", 'w', encoding='utf-8') as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    return summary


def _validation_pairs(val_images, train_images, section: ModelSection, seed: int):
    """Held-out pairs from the validation split, or from training images if it has one chain."""
    pairs_spec = (section.pairs_per_batch, section.positive_fraction)
    try:
        stream = sample_pairs(val_images, pairs_spec, seed, section.patch_size, section.align_to_grid)
    except DataError:
        logger.warning("validation split has fewer than two chains; drawing validation pairs from training images")
        stream = sample_pairs(train_images, pairs_spec, seed, section.patch_size, section.align_to_grid)
    return take(stream, section.val_pairs)


def extract_manifest(
    checkpoint: Union[str, Path],
    manifest: DatasetManifest,
    root: Union[str, Path],
    out_dir: Union[str, Path],
    tile: int,
    overlap: int,
    workers: int = 1,
    device: str = "cpu",
    role: Optional[str] = 'test',
    show_progress: bool = False
) -> List[Path]:
    """Extract and save the comprint of every entry of `role`."""
    root, out_dir = Path(root), Path(out_dir)
    model, meta = load_checkpoint(checkpoint, device)
    tag = meta.get('tag') or Path(checkpoint).parent.name
    entries = manifest.by_role(role) if role else list(manifest.entries)

    def run_one(entry) -> Path:
        image = SourceImage(id=entry.image_id, pixels=load_pixels(root / entry.path), origin=entry.path)
        comprint = extract_comprint(model, image, tile, overlap, model_tag=tag, device=device)
        return save_comprint(comprint, out_dir / entry.image_id)

    processor = BatchProcessor(max_workers=workers, show_progress=show_progress)
    return processor.map(run_one, entries, desc=f"extract {tag}")


def extract_images(
    checkpoint: Union[str, Path],
    source: Union[str, Path],
    out_dir: Union[str, Path],
    tile: int,
    overlap: int,
    workers: int = 1,
    device: str = "cpu",
    show_progress: bool = False
) -> List[Path]:
    """Extract comprints of one image file or of every image under a directory."""
    source, out_dir = Path(source), Path(out_dir)
    model, meta = load_checkpoint(checkpoint, device)
    tag = meta.get('tag') or Path(checkpoint).parent.name
    if source.is_dir():
        ids = assign_ids(find_images(source), source)
    elif source.is_file():
        ids = {source: None}
    else:
        raise DataError(f"no image file or directory at {source}")

    def run_one(item) -> Path:
        path, image_id = item
        comprint = extract_comprint(model, load_image_file(path, image_id), tile, overlap,
                                    model_tag=tag, device=device)
        return save_comprint(comprint, out_dir / comprint.source_id)

    processor = BatchProcessor(max_workers=workers, show_progress=show_progress)
    return processor.map(run_one, sorted(ids.items(), key=lambda kv: str(kv[0])), desc=f"extract {tag}",
                         item_name=lambda kv: str(kv[0]))
