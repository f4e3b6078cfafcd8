"""
Model Configuration Module

Architecture settings for the generator and the class-conditional
discriminator.
"""

from dataclasses import asdict, dataclass
from typing import Any, Dict

from ..errors import ConfigError

ACTIVATIONS = ('relu', 'lrelu', 'tanh', 'none')
PAD_TYPES = ('reflect', 'zero')


@dataclass
class GeneratorConfig:
    """Generator architecture (content encoder, style encoder, AdaIN decoder)."""

    image_size: int = 64
    input_channels: int = 3
    base_channels: int = 32
    n_downsample: int = 2
    n_content_res_blocks: int = 2
    style_dim: int = 64
    n_adain_res_blocks: int = 2
    n_mlp_layers: int = 3
    mlp_dim: int = 256
    mlp_activation: str = 'relu'
    pad_type: str = 'reflect'

    def __post_init__(self):
        for name in ('image_size', 'input_channels', 'base_channels', 'n_downsample',
                     'n_content_res_blocks', 'style_dim', 'n_adain_res_blocks',
                     'n_mlp_layers', 'mlp_dim'):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.image_size % (2 ** self.n_downsample) != 0:
            raise ConfigError(
                f"image_size {self.image_size} is not divisible by 2^{self.n_downsample}"
            )
        if self.mlp_activation not in ACTIVATIONS:
            raise ConfigError(f"Unsupported mlp_activation: {self.mlp_activation}")
        if self.pad_type not in PAD_TYPES:
            raise ConfigError(f"Unsupported pad_type: {self.pad_type}")

    @property
    def downsample_factor(self) -> int:
        return 2 ** self.n_downsample

    @property
    def content_size(self) -> int:
        return self.image_size // self.downsample_factor

    @property
    def content_channels(self) -> int:
        return self.base_channels * self.downsample_factor

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def for_image_size(cls, image_size: int, **overrides) -> 'GeneratorConfig':
        """Default layout for a resolution: 3 downsamplings from 128 px up, else 2."""
        params = {'image_size': image_size, 'n_downsample': 3 if image_size >= 128 else 2}
        params.update(overrides)
        return cls(**params)


@dataclass
class DiscriminatorConfig:
    """Discriminator trunk and per-class head."""

    n_classes: int = 4
    input_channels: int = 3
    base_channels: int = 32
    n_layers: int = 3
    max_channels: int = 512

    def __post_init__(self):
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be >= 2, got {self.n_classes}")
        for name in ('input_channels', 'base_channels', 'n_layers', 'max_channels'):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")

    @property
    def feature_dim(self) -> int:
        return min(self.base_channels * 2 ** self.n_layers, self.max_channels)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
