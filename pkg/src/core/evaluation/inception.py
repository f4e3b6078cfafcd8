"""
Inception Score Module

exp of the mean KL divergence between per-image class distributions and
their marginal, computed per split and averaged over splits.
"""

import logging
from typing import Callable, Sequence, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from scipy.stats import entropy

from ..model.blocks import initialize_weights

logger = logging.getLogger(__name__)

PROBABILITY_TOLERANCE = 1e-6

Classifier = Callable[[torch.Tensor], torch.Tensor]


def score_from_probabilities(probabilities: np.ndarray, n_splits: int = 1) -> float:
    """
    Inception score of an (N, n_classes) matrix of class distributions.

    Raises:
        ValueError: empty input, fewer rows than splits, or rows that are
            negative or do not sum to 1
    """
    probs = np.asarray(probabilities, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise ValueError("Inception score needs at least one class distribution")
    if n_splits < 1 or probs.shape[0] < n_splits:
        raise ValueError(f"Cannot split {probs.shape[0]} images into {n_splits} splits")
    if (probs < 0).any() or not np.allclose(probs.sum(axis=1), 1.0, atol=PROBABILITY_TOLERANCE):
        raise ValueError("Classifier output must be non-negative and sum to 1 per image")

    split_scores = []
    for part in np.array_split(probs, n_splits):
        py = part.mean(axis=0)
        kl = [entropy(p, py) for p in part]
        split_scores.append(np.exp(np.mean(kl)))
    return float(np.mean(split_scores))


def inception_score(images: Union[torch.Tensor, Sequence[torch.Tensor]], classifier: Classifier,
                    n_splits: int = 1, batch_size: int = 64) -> float:
    """
    Inception score of a set of images.

    Args:
        images: (N, C, H, W) tensor or a sequence of (C, H, W) tensors
        classifier: Maps a batch to per-image class probabilities
        n_splits: Number of splits averaged over
        batch_size: Classifier batch size
    """
    if len(images) == 0:
        raise ValueError("Inception score needs at least one image")
    batch = images if isinstance(images, torch.Tensor) else torch.stack(list(images))

    outputs = []
    with torch.no_grad():
        for start in range(0, batch.shape[0], batch_size):
            outputs.append(classifier(batch[start:start + batch_size]).detach().cpu().double().numpy())
    return score_from_probabilities(np.concatenate(outputs, axis=0), n_splits)


class RandomConvClassifier(nn.Module):
    """Small fixed-seed classifier with a softmax output; deterministic and download-free."""

    def __init__(self, n_classes: int = 10, input_channels: int = 3, width: int = 16, seed: int = 0):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(input_channels, width, 3, 2, 1),
            nn.ReLU(),
            nn.Conv2d(width, width, 3, 2, 1),
            nn.ReLU(),
            nn.AdaptiveAvgPool2d(1),
        )
        self.fc = nn.Linear(width, n_classes)
        initialize_weights(self, seed)
        self.requires_grad_(False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.softmax(self.fc(self.features(x).flatten(1)), dim=1)


class TorchvisionInceptionClassifier(nn.Module):
    """Inception-v3 softmax over the 1000 ImageNet classes (needs torchvision)."""

    def __init__(self, weights: str = 'DEFAULT'):
        super().__init__()
        try:
            from torchvision.models import Inception_V3_Weights, inception_v3
        except ImportError as e:
            raise RuntimeError("torchvision is required for the Inception classifier") from e
        self.model = inception_v3(weights=Inception_V3_Weights.verify(weights), aux_logits=True).eval()
        self.requires_grad_(False)
        self.register_buffer('mean', torch.tensor((0.485, 0.456, 0.406))[None, :, None, None])
        self.register_buffer('std', torch.tensor((0.229, 0.224, 0.225))[None, :, None, None])
        logger.info("Loaded Inception-v3 classifier")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = F.interpolate(x.float(), size=(299, 299), mode='bilinear', align_corners=False)
        x = ((x + 1) / 2 - self.mean) / self.std
        return F.softmax(self.model(x), dim=1)


CLASSIFIERS = {
    'random': RandomConvClassifier,
    'inception': TorchvisionInceptionClassifier,
}
