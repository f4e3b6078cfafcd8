"""
Batch Sampling Module

Draws (content image, content class, style set, style class) training
samples from a manifest. Every batch is a pure function of (seed, iteration).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from ..dataset.records import DatasetManifest
from ..errors import ManifestError
from .config import TrainConfig

logger = logging.getLogger(__name__)

ImageSource = Callable[[str], torch.Tensor]


def batch_rng(seed: int, iteration: int) -> np.random.Generator:
    """Independent generator for one training iteration."""
    return np.random.default_rng([seed, iteration])


@dataclass(frozen=True)
class BatchIndices:
    """Record positions of a batch; ``style`` has shape (batch_size, k_shot)."""

    content_classes: np.ndarray
    content: np.ndarray
    style_classes: np.ndarray
    style: np.ndarray


@dataclass(frozen=True)
class TrainingBatch:
    content: torch.Tensor          # (B, C, H, W)
    content_classes: torch.Tensor  # (B,)
    style: torch.Tensor            # (B, K, C, H, W)
    style_classes: torch.Tensor    # (B,)
    indices: Optional[BatchIndices] = None


def sample_indices(train: DatasetManifest, batch_size: int, k_shot: int,
                   rng: np.random.Generator, class_names: Optional[Sequence[str]] = None) -> BatchIndices:
    """
    Draw record positions for one batch.

    Content and style classes are uniform over classes (independently, so
    they may coincide); the content image is uniform within its class and
    the K style images are drawn without replacement, falling back to
    replacement for classes smaller than K.
    """
    names = list(class_names) if class_names is not None else train.class_names
    if len(names) < 2:
        raise ManifestError(f"Training needs at least 2 classes, got {len(names)}")

    content_classes = rng.integers(0, len(names), size=batch_size)
    style_classes = rng.integers(0, len(names), size=batch_size)
    content = np.empty(batch_size, dtype=np.int64)
    style = np.empty((batch_size, k_shot), dtype=np.int64)
    for i in range(batch_size):
        pool = train.class_index[names[content_classes[i]]]
        content[i] = pool[rng.integers(0, len(pool))]

        pool = np.asarray(train.class_index[names[style_classes[i]]])
        style[i] = rng.choice(pool, size=k_shot, replace=len(pool) < k_shot)
    return BatchIndices(content_classes, content, style_classes, style)


def sample_batch(train: DatasetManifest, cfg: TrainConfig, rng: np.random.Generator,
                 loader: ImageSource, class_names: Optional[Sequence[str]] = None) -> TrainingBatch:
    """
    Sample and load one training batch.

    Args:
        train: Training manifest (at least 2 classes)
        cfg: Supplies batch_size and k_shot
        rng: Use ``batch_rng(seed, iteration)`` for reproducible batches
        loader: Maps a record path to an image tensor
        class_names: Class order defining head indices; defaults to the
            manifest order

    Returns:
        TrainingBatch with class indices into ``class_names``
    """
    idx = sample_indices(train, cfg.batch_size, cfg.k_shot, rng, class_names)
    records = train.records
    content = torch.stack([loader(records[i].path) for i in idx.content])
    style = torch.stack([
        torch.stack([loader(records[j].path) for j in row]) for row in idx.style
    ])
    return TrainingBatch(
        content=content,
        content_classes=torch.as_tensor(idx.content_classes, dtype=torch.long),
        style=style,
        style_classes=torch.as_tensor(idx.style_classes, dtype=torch.long),
        indices=idx,
    )


def warn_small_classes(train: DatasetManifest, k_shot: int) -> int:
    """Log classes that will be sampled with replacement; returns their number."""
    small = [name for name in train.class_names if len(train.class_index[name]) < k_shot]
    for name in small:
        logger.warning("Class %r has %d images (< K=%d); style sets are drawn with replacement",
                       name, len(train.class_index[name]), k_shot)
    return len(small)
