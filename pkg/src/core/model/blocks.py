"""
Network Building Blocks

Convolution/linear blocks with selectable normalization and activation,
residual blocks, the AdaIN operation and seeded weight initialization.
"""

import math
from typing import Optional, Tuple

import torch
import torch.nn as nn

ADAIN_EPS = 1e-5


def adain(features: torch.Tensor, scale: torch.Tensor, shift: torch.Tensor,
          eps: float = ADAIN_EPS) -> torch.Tensor:
    """
    Adaptive instance normalization.

    Each channel of each sample is normalized with its own spatial mean and
    (biased) variance, then scaled and shifted.

    Args:
        features: Tensor (B, C, H, W) or (C, H, W)
        scale: Per-channel scale, (B, C) or (C,)
        shift: Per-channel shift, (B, C) or (C,)
        eps: Added to the variance

    Returns:
        Tensor with the shape of ``features``
    """
    single = features.dim() == 3
    if single:
        features = features.unsqueeze(0)
    if features.dim() != 4:
        raise ValueError(f"adain expects (B, C, H, W) or (C, H, W), got {tuple(features.shape)}")

    batch, channels = features.shape[0], features.shape[1]
    scale = _per_sample(scale, batch, channels, 'scale')
    shift = _per_sample(shift, batch, channels, 'shift')

    mean = features.mean(dim=(2, 3), keepdim=True)
    var = features.var(dim=(2, 3), unbiased=False, keepdim=True)
    normalized = (features - mean) / torch.sqrt(var + eps)
    out = normalized * scale[:, :, None, None] + shift[:, :, None, None]
    return out[0] if single else out


def _per_sample(vector: torch.Tensor, batch: int, channels: int, name: str) -> torch.Tensor:
    if vector.dim() == 1:
        vector = vector.unsqueeze(0)
    if vector.dim() != 2 or vector.shape[1] != channels or vector.shape[0] not in (1, batch):
        raise ValueError(
            f"{name} of shape {tuple(vector.shape)} does not match {batch} x {channels} features"
        )
    return vector.expand(batch, channels)


def make_activation(name: str) -> Optional[nn.Module]:
    if name == 'relu':
        return nn.ReLU()
    elif name == 'lrelu':
        return nn.LeakyReLU(0.2)
    elif name == 'tanh':
        return nn.Tanh()
    elif name == 'none':
        return None
    raise ValueError(f"Unsupported activation: {name}")


class Conv2dBlock(nn.Module):
    """Padding, convolution, optional instance norm, optional activation."""

    def __init__(self, input_dim: int, output_dim: int, kernel_size: int, stride: int,
                 padding: int = 0, norm: str = 'none', activation: str = 'relu',
                 pad_type: str = 'zero'):
        super().__init__()
        if pad_type == 'reflect':
            self.pad = nn.ReflectionPad2d(padding)
        elif pad_type == 'zero':
            self.pad = nn.ZeroPad2d(padding)
        else:
            raise ValueError(f"Unsupported padding type: {pad_type}")

        if norm == 'in':
            self.norm = nn.InstanceNorm2d(output_dim, eps=ADAIN_EPS)
        elif norm == 'none':
            self.norm = None
        else:
            raise ValueError(f"Unsupported normalization: {norm}")

        self.activation = make_activation(activation)
        self.conv = nn.Conv2d(input_dim, output_dim, kernel_size, stride, bias=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.conv(self.pad(x))
        if self.norm is not None:
            x = self.norm(x)
        if self.activation is not None:
            x = self.activation(x)
        return x


class ResBlock(nn.Module):
    """Two 3x3 convolutions with a skip connection."""

    def __init__(self, dim: int, norm: str = 'in', activation: str = 'relu', pad_type: str = 'zero'):
        super().__init__()
        self.model = nn.Sequential(
            Conv2dBlock(dim, dim, 3, 1, 1, norm=norm, activation=activation, pad_type=pad_type),
            Conv2dBlock(dim, dim, 3, 1, 1, norm=norm, activation='none', pad_type=pad_type),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.model(x)


class AdaINResBlock(nn.Module):
    """Residual block whose two normalizations take externally supplied AdaIN parameters."""

    norm_layers = 2

    def __init__(self, dim: int, activation: str = 'relu', pad_type: str = 'zero'):
        super().__init__()
        self.dim = dim
        self.conv1 = Conv2dBlock(dim, dim, 3, 1, 1, norm='none', activation='none', pad_type=pad_type)
        self.conv2 = Conv2dBlock(dim, dim, 3, 1, 1, norm='none', activation='none', pad_type=pad_type)
        self.activation = make_activation(activation)

    def forward(self, x: torch.Tensor, params: Tuple[Tuple[torch.Tensor, torch.Tensor], ...]) -> torch.Tensor:
        (scale1, shift1), (scale2, shift2) = params
        out = adain(self.conv1(x), scale1, shift1)
        if self.activation is not None:
            out = self.activation(out)
        out = adain(self.conv2(out), scale2, shift2)
        return x + out


class LinearBlock(nn.Module):
    def __init__(self, input_dim: int, output_dim: int, activation: str = 'relu'):
        super().__init__()
        self.fc = nn.Linear(input_dim, output_dim, bias=True)
        self.activation = make_activation(activation)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.fc(x)
        if self.activation is not None:
            out = self.activation(out)
        return out


class MLP(nn.Module):
    """``n_blk`` fully connected layers; no activation after the last one."""

    def __init__(self, input_dim: int, output_dim: int, dim: int, n_blk: int, activation: str = 'relu'):
        super().__init__()
        if n_blk == 1:
            layers = [LinearBlock(input_dim, output_dim, activation='none')]
        else:
            layers = [LinearBlock(input_dim, dim, activation=activation)]
            layers += [LinearBlock(dim, dim, activation=activation) for _ in range(n_blk - 2)]
            layers += [LinearBlock(dim, output_dim, activation='none')]
        self.model = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.model(x.reshape(x.size(0), -1))


def initialize_weights(module: nn.Module, seed: int = 0) -> nn.Module:
    """
    Gaussian fan-in initialization of every convolution and linear layer.

    Weights ~ N(0, 2 / fan_in), biases zero; layers are visited in module
    order so a fixed seed always yields the same parameters.
    """
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for layer in module.modules():
            if isinstance(layer, (nn.Conv2d, nn.Linear)):
                fan_in = layer.weight[0].numel()
                layer.weight.normal_(0.0, math.sqrt(2.0 / fan_in), generator=generator)
                if layer.bias is not None:
                    layer.bias.zero_()
    return module
