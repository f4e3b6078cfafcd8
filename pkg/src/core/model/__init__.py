"""
Model Core Module

Few-shot generator, class-conditional discriminator, their configurations
and checkpoint handling.
"""

from .blocks import adain, initialize_weights
from .config import DiscriminatorConfig, GeneratorConfig
from .generator import AdaINParams, FewShotGenerator
from .discriminator import ClassConditionalDiscriminator
from .checkpoint import (
    Checkpoint, build_models, checkpoint_path, load_checkpoint, make_checkpoint,
    restore_models, save_checkpoint,
)

__all__ = [
    'adain',
    'initialize_weights',
    'DiscriminatorConfig',
    'GeneratorConfig',
    'AdaINParams',
    'FewShotGenerator',
    'ClassConditionalDiscriminator',
    'Checkpoint',
    'build_models',
    'checkpoint_path',
    'load_checkpoint',
    'make_checkpoint',
    'restore_models',
    'save_checkpoint',
]
