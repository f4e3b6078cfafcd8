"""
Discriminator Module

Class-conditional discriminator: one convolutional trunk shared by all
classes and a 1x1 prediction head with one realness logit per class.
"""

from typing import Union

import torch
import torch.nn as nn

from .blocks import Conv2dBlock, initialize_weights
from .config import DiscriminatorConfig


class ClassConditionalDiscriminator(nn.Module):
    """
    Multi-head real/fake discriminator.

    Head ``c`` belongs to the ``c``-th class of the training manifest. A loss
    that only reads head ``c`` leaves all other head parameters without
    gradient.
    """

    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        self.cfg = cfg
        dim = cfg.base_channels
        layers = [Conv2dBlock(cfg.input_channels, dim, 3, 1, 1, norm='none', activation='lrelu',
                              pad_type='zero')]
        for _ in range(cfg.n_layers):
            out_dim = min(2 * dim, cfg.max_channels)
            layers.append(Conv2dBlock(dim, out_dim, 4, 2, 1, norm='none', activation='lrelu',
                                      pad_type='zero'))
            dim = out_dim
        self.trunk = nn.Sequential(*layers)
        self.head = nn.Conv2d(dim, cfg.n_classes, 1, 1, 0)
        self.feature_dim = dim

    @property
    def n_classes(self) -> int:
        return self.cfg.n_classes

    def _batch(self, x: torch.Tensor):
        single = x.dim() == 3
        if single:
            x = x.unsqueeze(0)
        if x.dim() != 4 or x.shape[1] != self.cfg.input_channels:
            raise ValueError(
                f"Discriminator expects ({self.cfg.input_channels}, H, W) images, got {tuple(x.shape)}"
            )
        return x, single

    def discriminate(self, x: torch.Tensor) -> torch.Tensor:
        """Realness logits, (n_classes,) per image."""
        batch, single = self._batch(x)
        scores = self.head(self.trunk(batch)).mean(dim=(2, 3))
        return scores[0] if single else scores

    def realness(self, x: torch.Tensor, c: Union[int, torch.Tensor]) -> torch.Tensor:
        """Logit of head ``c``; ``c`` is an int or one class index per batch row."""
        scores = self.discriminate(x)
        index = torch.as_tensor(c, dtype=torch.long, device=scores.device)
        if index.numel() and (index.min() < 0 or index.max() >= self.n_classes):
            raise IndexError(f"Class index {c} out of range for {self.n_classes} classes")
        if scores.dim() == 1:
            if index.dim() != 0:
                raise ValueError("A single image takes a single class index")
            return scores[index]
        if index.dim() == 0:
            index = index.expand(scores.shape[0])
        if index.shape[0] != scores.shape[0]:
            raise ValueError(f"{index.shape[0]} class indices for {scores.shape[0]} images")
        return scores.gather(1, index.unsqueeze(1)).squeeze(1)

    def extract_features(self, x: torch.Tensor) -> torch.Tensor:
        """Globally pooled trunk activations, length feature_dim, independent of the head."""
        batch, single = self._batch(x)
        features = self.trunk(batch).mean(dim=(2, 3))
        return features[0] if single else features

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.discriminate(x)

    def reset_head(self, n_classes: int, seed: int = 0):
        """Replace the prediction head with a freshly initialized one for ``n_classes`` classes."""
        self.cfg = DiscriminatorConfig(**{**self.cfg.to_dict(), 'n_classes': n_classes})
        head = nn.Conv2d(self.feature_dim, n_classes, 1, 1, 0)
        initialize_weights(head, seed)
        self.head = head.to(device=self.head.weight.device, dtype=self.head.weight.dtype)
