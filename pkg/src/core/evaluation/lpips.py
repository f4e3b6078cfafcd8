"""
Perceptual Distance Module

LPIPS-style distance over a pluggable feature backbone: features are
unit-normalized along channels, squared differences are weighted per
channel, averaged over space and summed over layers.
"""

import logging
from typing import List, Optional, Sequence

import torch
import torch.nn as nn

from ..model.blocks import initialize_weights

logger = logging.getLogger(__name__)

NORM_EPS = 1e-10


def normalize_channels(features: torch.Tensor, eps: float = NORM_EPS) -> torch.Tensor:
    """Scale each spatial feature vector of a (B, C, H, W) map to unit length."""
    norm = torch.sqrt((features ** 2).sum(dim=1, keepdim=True))
    return features / (norm + eps)


class FeatureBackbone(nn.Module):
    """Base class: ``forward`` returns one feature map per compared layer."""

    def layer_weights(self) -> List[torch.Tensor]:
        raise NotImplementedError


def lpips(a: torch.Tensor, b: torch.Tensor, backbone: FeatureBackbone) -> torch.Tensor:
    """
    Perceptual distance between two images or two batches.

    Args:
        a, b: Tensors of equal shape, (C, H, W) or (B, C, H, W), in [-1, 1]
        backbone: Feature extractor

    Returns:
        Scalar for single images, (B,) for batches; always >= 0
    """
    if a.shape != b.shape:
        raise ValueError(f"lpips needs equal shapes, got {tuple(a.shape)} and {tuple(b.shape)}")
    single = a.dim() == 3
    if single:
        a, b = a.unsqueeze(0), b.unsqueeze(0)

    total = torch.zeros(a.shape[0], dtype=a.dtype, device=a.device)
    for fa, fb, weight in zip(backbone(a), backbone(b), backbone.layer_weights()):
        diff = (normalize_channels(fa) - normalize_channels(fb)) ** 2
        weighted = (diff * weight.to(diff)[None, :, None, None]).sum(dim=1)
        total = total + weighted.mean(dim=(1, 2))
    return total[0] if single else total


class RandomConvBackbone(FeatureBackbone):
    """
    Small fixed-seed convolutional feature stack.

    Deterministic and download-free; the first layer keeps the resolution,
    every later layer halves it.
    """

    def __init__(self, channels: Sequence[int] = (8, 16), input_channels: int = 3, seed: int = 0,
                 weights: Optional[Sequence[Sequence[float]]] = None):
        super().__init__()
        layers = []
        previous = input_channels
        for i, width in enumerate(channels):
            layers.append(nn.Sequential(
                nn.Conv2d(previous, width, 3, 1 if i == 0 else 2, 1),
                nn.ReLU(),
            ))
            previous = width
        self.layers = nn.ModuleList(layers)
        initialize_weights(self, seed)
        self.requires_grad_(False)

        if weights is None:
            weights = [[1.0] * width for width in channels]
        for i, (w, width) in enumerate(zip(weights, channels)):
            if len(w) != width:
                raise ValueError(f"Layer {i} has {width} channels but {len(w)} weights")
            self.register_buffer(f'weight_{i}', torch.tensor(list(w), dtype=torch.float32))

    def layer_weights(self) -> List[torch.Tensor]:
        return [getattr(self, f'weight_{i}') for i in range(len(self.layers))]

    def forward(self, x: torch.Tensor) -> List[torch.Tensor]:
        features = []
        for layer in self.layers:
            x = layer(x)
            features.append(x)
        return features


class TorchvisionVGGBackbone(FeatureBackbone):
    """VGG-16 relu1_2 .. relu5_3 activations with unit channel weights (needs torchvision)."""

    SLICE_ENDS = (4, 9, 16, 23, 30)
    MEAN = (0.485, 0.456, 0.406)
    STD = (0.229, 0.224, 0.225)

    def __init__(self, weights: str = 'DEFAULT'):
        super().__init__()
        try:
            from torchvision.models import VGG16_Weights, vgg16
        except ImportError as e:
            raise RuntimeError("torchvision is required for the VGG backbone") from e
        features = vgg16(weights=VGG16_Weights.verify(weights)).features.eval()
        starts = (0,) + self.SLICE_ENDS[:-1]
        self.slices = nn.ModuleList(features[s:e] for s, e in zip(starts, self.SLICE_ENDS))
        self.requires_grad_(False)
        self.register_buffer('mean', torch.tensor(self.MEAN)[None, :, None, None])
        self.register_buffer('std', torch.tensor(self.STD)[None, :, None, None])
        self._widths = [s[-2].out_channels for s in self.slices]
        logger.info("Loaded VGG-16 LPIPS backbone")

    def layer_weights(self) -> List[torch.Tensor]:
        return [torch.ones(w) for w in self._widths]

    def forward(self, x: torch.Tensor) -> List[torch.Tensor]:
        x = ((x + 1) / 2 - self.mean.to(x)) / self.std.to(x)
        features = []
        for block in self.slices:
            x = block(x)
            features.append(x)
        return features


BACKBONES = {
    'random': RandomConvBackbone,
    'vgg': TorchvisionVGGBackbone,
}
