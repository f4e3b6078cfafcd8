"""
Generator Module

Few-shot generator: a content encoder, a style encoder whose codes are
averaged over the K style images, an MLP regressing AdaIN parameters and an
AdaIN decoder.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import torch
import torch.nn as nn

from .blocks import AdaINResBlock, Conv2dBlock, MLP, ResBlock
from .config import GeneratorConfig

StyleImages = Union[torch.Tensor, Sequence[torch.Tensor]]


@dataclass(frozen=True)
class AdaINParams:
    """One (scale, shift) pair per AdaIN-normalized layer, in decoder order."""

    layers: Tuple[Tuple[torch.Tensor, torch.Tensor], ...]

    def __len__(self) -> int:
        return len(self.layers)

    def block(self, index: int, per_block: int = AdaINResBlock.norm_layers):
        return self.layers[index * per_block:(index + 1) * per_block]

    def flatten(self) -> torch.Tensor:
        """All scales and shifts concatenated along the channel axis."""
        return torch.cat([t for pair in self.layers for t in pair], dim=-1)


class ContentEncoder(nn.Module):
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        dim = cfg.base_channels
        layers = [Conv2dBlock(cfg.input_channels, dim, 7, 1, 3, norm='in', activation='relu',
                              pad_type=cfg.pad_type)]
        for _ in range(cfg.n_downsample):
            layers.append(Conv2dBlock(dim, 2 * dim, 4, 2, 1, norm='in', activation='relu',
                                      pad_type=cfg.pad_type))
            dim *= 2
        layers += [ResBlock(dim, norm='in', activation='relu', pad_type=cfg.pad_type)
                   for _ in range(cfg.n_content_res_blocks)]
        self.model = nn.Sequential(*layers)
        self.output_dim = dim

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.model(x)


class StyleEncoder(nn.Module):
    # no normalization layers
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        dim = cfg.base_channels
        layers = [Conv2dBlock(cfg.input_channels, dim, 7, 1, 3, norm='none', activation='relu',
                              pad_type=cfg.pad_type)]
        for _ in range(cfg.n_downsample):
            layers.append(Conv2dBlock(dim, 2 * dim, 4, 2, 1, norm='none', activation='relu',
                                      pad_type=cfg.pad_type))
            dim *= 2
        layers += [nn.AdaptiveAvgPool2d(1), nn.Conv2d(dim, cfg.style_dim, 1, 1, 0)]
        self.model = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.model(x).flatten(1)


class Decoder(nn.Module):
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        dim = cfg.content_channels
        self.res_blocks = nn.ModuleList(
            AdaINResBlock(dim, activation='relu', pad_type=cfg.pad_type)
            for _ in range(cfg.n_adain_res_blocks)
        )
        layers = []
        for _ in range(cfg.n_downsample):
            layers += [nn.Upsample(scale_factor=2, mode='nearest'),
                       Conv2dBlock(dim, dim // 2, 5, 1, 2, norm='none', activation='relu',
                                   pad_type=cfg.pad_type)]
            dim //= 2
        layers.append(Conv2dBlock(dim, cfg.input_channels, 7, 1, 3, norm='none', activation='tanh',
                                  pad_type=cfg.pad_type))
        self.upsample = nn.Sequential(*layers)

    def forward(self, content: torch.Tensor, params: AdaINParams) -> torch.Tensor:
        x = content
        for i, block in enumerate(self.res_blocks):
            x = block(x, params.block(i))
        return self.upsample(x)


class FewShotGenerator(nn.Module):
    """
    Translates a content image into the class shown by a few style images.

    Single images are (C, H, W) tensors, batches (B, C, H, W). Every method
    returns batched output for batched input and unbatched output otherwise.
    Nothing is cached between calls.
    """

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        self.content_encoder = ContentEncoder(cfg)
        self.style_encoder = StyleEncoder(cfg)
        self.decoder = Decoder(cfg)
        self.adain_channels = cfg.content_channels
        self.n_adain_layers = cfg.n_adain_res_blocks * AdaINResBlock.norm_layers
        self.mlp = MLP(cfg.style_dim, 2 * self.adain_channels * self.n_adain_layers,
                       cfg.mlp_dim, cfg.n_mlp_layers, activation=cfg.mlp_activation)

    # ------------------------------------------------------------------ #
    # Shape handling
    # ------------------------------------------------------------------ #

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return (self.cfg.input_channels, self.cfg.image_size, self.cfg.image_size)

    @property
    def content_shape(self) -> Tuple[int, int, int]:
        return (self.cfg.content_channels, self.cfg.content_size, self.cfg.content_size)

    def _as_batch(self, x: torch.Tensor, expected: Tuple[int, ...], what: str) -> Tuple[torch.Tensor, bool]:
        if x.dim() == len(expected):
            x, single = x.unsqueeze(0), True
        else:
            single = False
        if x.dim() != len(expected) + 1 or tuple(x.shape[1:]) != expected:
            raise ValueError(f"{what} must have shape {expected} or (B, *{expected}), got {tuple(x.shape)}")
        return x, single

    # ------------------------------------------------------------------ #
    # Stages
    # ------------------------------------------------------------------ #

    def encode_content(self, x: torch.Tensor) -> torch.Tensor:
        """Content code of shape (content_channels, size / 2^n, size / 2^n)."""
        batch, single = self._as_batch(x, self.image_shape, "Content image")
        code = self.content_encoder(batch)
        return code[0] if single else code

    def encode_style_one(self, y: torch.Tensor) -> torch.Tensor:
        """Style vector of length style_dim for one image (or one per batch row)."""
        batch, single = self._as_batch(y, self.image_shape, "Style image")
        code = self.style_encoder(batch)
        return code[0] if single else code

    def encode_style(self, images: StyleImages) -> torch.Tensor:
        """
        Average style code of a style set.

        Args:
            images: K images, given as a sequence of (C, H, W) tensors, a
                (K, C, H, W) tensor, a sequence of K (B, C, H, W) tensors or a
                (B, K, C, H, W) tensor

        Returns:
            (style_dim,) for one style set, (B, style_dim) for a batch of sets
        """
        if isinstance(images, torch.Tensor):
            stacked = images
        else:
            if len(images) == 0:
                raise ValueError("At least one style image is required")
            stacked = torch.stack(list(images), dim=0 if images[0].dim() == 3 else 1)

        if stacked.dim() == 4:
            if stacked.shape[0] == 0:
                raise ValueError("At least one style image is required")
            return self.encode_style_one(stacked).mean(dim=0)
        if stacked.dim() == 5:
            b, k = stacked.shape[:2]
            if k == 0:
                raise ValueError("At least one style image is required")
            codes = self.encode_style_one(stacked.reshape(b * k, *stacked.shape[2:]))
            return codes.view(b, k, -1).mean(dim=1)
        raise ValueError(f"Unsupported style image tensor shape {tuple(stacked.shape)}")

    def compute_adain_params(self, style: torch.Tensor) -> AdaINParams:
        """Regress one (scale, shift) pair per AdaIN layer from a style code."""
        single = style.dim() == 1
        if single:
            style = style.unsqueeze(0)
        if style.dim() != 2 or style.shape[1] != self.cfg.style_dim:
            raise ValueError(f"Style code must have length {self.cfg.style_dim}, got {tuple(style.shape)}")

        out = self.mlp(style)
        c = self.adain_channels
        layers = []
        for i in range(self.n_adain_layers):
            chunk = out[:, 2 * c * i:2 * c * (i + 1)]
            scale, shift = chunk[:, :c], chunk[:, c:]
            layers.append((scale[0], shift[0]) if single else (scale, shift))
        return AdaINParams(layers=tuple(layers))

    def decode(self, content: torch.Tensor, params: AdaINParams) -> torch.Tensor:
        """Image in [-1, 1] with the generator input shape."""
        batch, single = self._as_batch(content, self.content_shape, "Content code")
        if len(params) != self.n_adain_layers:
            raise ValueError(f"Expected {self.n_adain_layers} AdaIN layers, got {len(params)}")
        image = self.decoder(batch, params)
        return image[0] if single else image

    def translate(self, x: torch.Tensor, images: StyleImages) -> torch.Tensor:
        return self.decode(self.encode_content(x), self.compute_adain_params(self.encode_style(images)))

    def forward(self, x: torch.Tensor, images: StyleImages) -> torch.Tensor:
        return self.translate(x, images)
