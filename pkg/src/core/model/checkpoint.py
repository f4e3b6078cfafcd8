"""
Checkpoint Module

Versioned container for generator/discriminator parameters, optimizer
state, the class list and the iteration counter.
"""

import copy
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import torch

from ..errors import CheckpointMismatchError
from .blocks import initialize_weights
from .config import DiscriminatorConfig, GeneratorConfig
from .discriminator import ClassConditionalDiscriminator
from .generator import FewShotGenerator

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

StateDict = Dict[str, torch.Tensor]


@dataclass
class Checkpoint:
    generator_config: Dict[str, Any]
    discriminator_config: Dict[str, Any]
    class_names: Tuple[str, ...]
    generator_state: StateDict
    discriminator_state: StateDict
    generator_optimizer: Optional[Dict[str, Any]] = None
    discriminator_optimizer: Optional[Dict[str, Any]] = None
    iteration: int = 0
    train_config: Dict[str, Any] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)
    version: int = CHECKPOINT_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return {
            'version': self.version,
            'generator_config': dict(self.generator_config),
            'discriminator_config': dict(self.discriminator_config),
            'class_names': list(self.class_names),
            'generator_state': self.generator_state,
            'discriminator_state': self.discriminator_state,
            'generator_optimizer': self.generator_optimizer,
            'discriminator_optimizer': self.discriminator_optimizer,
            'iteration': self.iteration,
            'train_config': dict(self.train_config),
            'metadata': dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Checkpoint':
        version = data.get('version')
        if version != CHECKPOINT_VERSION:
            raise CheckpointMismatchError(
                f"Unsupported checkpoint version {version!r} (expected {CHECKPOINT_VERSION})"
            )
        return cls(
            generator_config=dict(data['generator_config']),
            discriminator_config=dict(data['discriminator_config']),
            class_names=tuple(data['class_names']),
            generator_state=data['generator_state'],
            discriminator_state=data['discriminator_state'],
            generator_optimizer=data.get('generator_optimizer'),
            discriminator_optimizer=data.get('discriminator_optimizer'),
            iteration=int(data.get('iteration', 0)),
            train_config=dict(data.get('train_config', {})),
            metadata=dict(data.get('metadata', {})),
            version=version,
        )


def _detached_state(module: torch.nn.Module) -> StateDict:
    return {k: v.detach().cpu().clone() for k, v in module.state_dict().items()}


def build_models(gen_cfg: GeneratorConfig, dis_cfg: DiscriminatorConfig, seed: int = 0,
                 dtype: torch.dtype = torch.float32) -> Tuple[FewShotGenerator, ClassConditionalDiscriminator]:
    """Freshly initialized generator and discriminator; same seed, same weights."""
    generator = initialize_weights(FewShotGenerator(gen_cfg), seed)
    discriminator = initialize_weights(ClassConditionalDiscriminator(dis_cfg), seed + 1)
    return generator.to(dtype), discriminator.to(dtype)


def make_checkpoint(generator: FewShotGenerator, discriminator: ClassConditionalDiscriminator,
                    class_names: Sequence[str], iteration: int = 0,
                    generator_optimizer: Optional[torch.optim.Optimizer] = None,
                    discriminator_optimizer: Optional[torch.optim.Optimizer] = None,
                    train_config: Optional[Dict[str, Any]] = None,
                    metadata: Optional[Dict[str, Any]] = None) -> Checkpoint:
    """Snapshot models and optimizers; later training does not alter the snapshot."""
    if len(class_names) != discriminator.n_classes:
        raise CheckpointMismatchError(
            f"{len(class_names)} class names for a discriminator with {discriminator.n_classes} heads"
        )
    return Checkpoint(
        generator_config=generator.cfg.to_dict(),
        discriminator_config=discriminator.cfg.to_dict(),
        class_names=tuple(class_names),
        generator_state=_detached_state(generator),
        discriminator_state=_detached_state(discriminator),
        generator_optimizer=copy.deepcopy(generator_optimizer.state_dict()) if generator_optimizer else None,
        discriminator_optimizer=(copy.deepcopy(discriminator_optimizer.state_dict())
                                 if discriminator_optimizer else None),
        iteration=iteration,
        train_config=dict(train_config or {}),
        metadata=dict(metadata or {}),
    )


def restore_models(checkpoint: Checkpoint, gen_cfg: Optional[GeneratorConfig] = None,
                   dis_cfg: Optional[DiscriminatorConfig] = None,
                   dtype: Optional[torch.dtype] = None
                   ) -> Tuple[FewShotGenerator, ClassConditionalDiscriminator]:
    """
    Rebuild the models stored in a checkpoint.

    Raises:
        CheckpointMismatchError: ``gen_cfg`` / ``dis_cfg`` given and different
            from the stored configuration
    """
    stored_gen = GeneratorConfig(**checkpoint.generator_config)
    stored_dis = DiscriminatorConfig(**checkpoint.discriminator_config)
    if gen_cfg is not None and gen_cfg != stored_gen:
        raise CheckpointMismatchError(f"Generator config mismatch: {gen_cfg} != stored {stored_gen}")
    if dis_cfg is not None and dis_cfg != stored_dis:
        raise CheckpointMismatchError(f"Discriminator config mismatch: {dis_cfg} != stored {stored_dis}")

    generator = FewShotGenerator(stored_gen)
    discriminator = ClassConditionalDiscriminator(stored_dis)
    if dtype is None:
        dtype = next(iter(checkpoint.generator_state.values())).dtype
    generator.to(dtype).load_state_dict(checkpoint.generator_state)
    discriminator.to(dtype).load_state_dict(checkpoint.discriminator_state)
    return generator, discriminator


def save_checkpoint(checkpoint: Checkpoint, path: Union[str, Path]) -> Path:
    """Write atomically: a crash mid-write leaves any previous file at ``path`` intact."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + '.tmp')
    torch.save(checkpoint.to_dict(), tmp)
    os.replace(tmp, path)
    logger.debug("Checkpoint at iteration %d written to %s", checkpoint.iteration, path)
    return path


def load_checkpoint(path: Union[str, Path], map_location: str = 'cpu') -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    data = torch.load(path, map_location=map_location, weights_only=True)
    return Checkpoint.from_dict(data)


def checkpoint_path(directory: Union[str, Path], iteration: Optional[int] = None) -> Path:
    """``ckpt_<iteration>.pt``, or ``latest.pt`` when no iteration is given."""
    directory = Path(directory)
    if iteration is None:
        return directory / 'latest.pt'
    return directory / f"ckpt_{iteration:08d}.pt"
