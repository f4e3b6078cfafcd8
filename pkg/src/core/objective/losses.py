"""
Losses Module

Class-conditional GAN loss, content reconstruction loss and discriminator
feature matching loss, combined into the generator objective.

Logistic losses are written with softplus on logits:
-log(sigmoid(z)) = softplus(-z) and -log(1 - sigmoid(z)) = softplus(z).
"""

import math
from typing import Optional, Sequence, Union

import torch
import torch.nn.functional as F

from ..errors import TrainingDivergedError
from .config import TrainConfig

StyleImages = Union[torch.Tensor, Sequence[torch.Tensor]]


def check_finite(name: str, value: Union[torch.Tensor, float], iteration: Optional[int] = None):
    """Raise TrainingDivergedError when a loss value is NaN or infinite."""
    number = float(value.detach()) if isinstance(value, torch.Tensor) else float(value)
    if not math.isfinite(number):
        where = f" at iteration {iteration}" if iteration is not None else ""
        raise TrainingDivergedError(f"Loss '{name}' is {number}{where}")


def discriminator_logistic_loss(real_logits: torch.Tensor, fake_logits: torch.Tensor) -> torch.Tensor:
    """-log sigmoid(real) - log(1 - sigmoid(fake)), averaged over the batch."""
    return (F.softplus(-real_logits) + F.softplus(fake_logits)).mean()


def generator_logistic_loss(fake_logits: torch.Tensor, mode: str = 'nonsaturating') -> torch.Tensor:
    if mode == 'nonsaturating':
        return F.softplus(-fake_logits).mean()
    elif mode == 'saturating':
        # log(1 - sigmoid(z))
        return (-F.softplus(fake_logits)).mean()
    raise ValueError(f"Unknown GAN mode: {mode}")


def gan_loss_discriminator(discriminator, real_x: torch.Tensor, c_x, fake_xbar: torch.Tensor, c_y) -> torch.Tensor:
    """Discriminator GAN loss; only heads ``c_x`` and ``c_y`` contribute."""
    real_logits = discriminator.realness(real_x, c_x)
    fake_logits = discriminator.realness(fake_xbar.detach(), c_y)
    loss = discriminator_logistic_loss(real_logits, fake_logits)
    check_finite('gan_d', loss)
    return loss


def gan_loss_generator(discriminator, fake_xbar: torch.Tensor, c_y, mode: str = 'nonsaturating') -> torch.Tensor:
    loss = generator_logistic_loss(discriminator.realness(fake_xbar, c_y), mode)
    check_finite('gan_g', loss)
    return loss


def _self_style(x: torch.Tensor):
    # each image is its own one-element style set
    return [x] if x.dim() == 3 else x.unsqueeze(1)


def reconstruction_loss(x: torch.Tensor, generator) -> torch.Tensor:
    """Mean absolute difference between ``x`` and its translation with itself as style."""
    reconstructed = generator.translate(x, _self_style(x))
    if reconstructed.shape != x.shape:
        raise ValueError(f"Reconstruction shape {tuple(reconstructed.shape)} != input {tuple(x.shape)}")
    return (reconstructed - x).abs().mean()


def mean_style_features(images: StyleImages, discriminator) -> torch.Tensor:
    """Discriminator features averaged over each style set."""
    if not isinstance(images, torch.Tensor):
        if len(images) == 0:
            raise ValueError("At least one style image is required")
        images = torch.stack(list(images), dim=0 if images[0].dim() == 3 else 1)
    if images.dim() == 4:
        return discriminator.extract_features(images).mean(dim=0)
    if images.dim() == 5:
        b, k = images.shape[:2]
        features = discriminator.extract_features(images.reshape(b * k, *images.shape[2:]))
        return features.view(b, k, -1).mean(dim=1)
    raise ValueError(f"Unsupported style image tensor shape {tuple(images.shape)}")


def feature_matching_loss(xbar: torch.Tensor, images: StyleImages, discriminator) -> torch.Tensor:
    """Mean absolute difference between features of ``xbar`` and the mean style features."""
    target = mean_style_features(images, discriminator).detach()
    features = discriminator.extract_features(xbar)
    if features.shape != target.shape:
        raise ValueError(f"Feature shape {tuple(features.shape)} != style feature shape {tuple(target.shape)}")
    return (features - target).abs().mean()


def total_generator_loss(gan_g, recon, feat_match, cfg: Optional[TrainConfig] = None):
    """gan_g + lambda_r * recon + lambda_f * feat_match."""
    cfg = cfg or TrainConfig()
    total = gan_g + cfg.lambda_r * recon + cfg.lambda_f * feat_match
    check_finite('total_g', total)
    return total
