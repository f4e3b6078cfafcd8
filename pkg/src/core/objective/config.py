"""
Training Configuration Module

Optimizer and loss settings, and the per-step loss record.
"""

from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict

import torch

from ..errors import ConfigError

GAN_MODES = ('nonsaturating', 'saturating')
DTYPES = {'float32': torch.float32, 'float64': torch.float64}

FINE_TUNE_LR_FACTOR = 0.1
FINE_TUNE_ITERATIONS = 250_000


@dataclass
class TrainConfig:
    """Hyperparameters of the alternating minimax training."""

    learning_rate: float = 1e-4
    lambda_r: float = 0.1
    lambda_f: float = 1.0
    batch_size: int = 4
    k_shot: int = 1
    max_iterations: int = 1000
    seed: int = 0
    rms_alpha: float = 0.99
    rms_eps: float = 1e-8
    gan_mode: str = 'nonsaturating'
    checkpoint_interval: int = 1000
    log_interval: int = 100
    dtype: str = 'float32'

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.lambda_r < 0 or self.lambda_f < 0:
            raise ConfigError(f"lambda_r and lambda_f must be >= 0, got {self.lambda_r}, {self.lambda_f}")
        if self.k_shot < 1:
            raise ConfigError(f"k_shot must be >= 1, got {self.k_shot}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_iterations < 0:
            raise ConfigError(f"max_iterations must be >= 0, got {self.max_iterations}")
        if self.checkpoint_interval < 1 or self.log_interval < 1:
            raise ConfigError("checkpoint_interval and log_interval must be >= 1")
        if not 0 <= self.rms_alpha < 1:
            raise ConfigError(f"rms_alpha must be in [0, 1), got {self.rms_alpha}")
        if self.gan_mode not in GAN_MODES:
            raise ConfigError(f"gan_mode must be one of {GAN_MODES}, got {self.gan_mode!r}")
        if self.dtype not in DTYPES:
            raise ConfigError(f"dtype must be one of {tuple(DTYPES)}, got {self.dtype!r}")

    @property
    def torch_dtype(self) -> torch.dtype:
        return DTYPES[self.dtype]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrainConfig':
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})

    def for_fine_tuning(self, iterations: int = FINE_TUNE_ITERATIONS) -> 'TrainConfig':
        """Learning rate divided by ten, ``iterations`` steps."""
        return replace(self, learning_rate=self.learning_rate * FINE_TUNE_LR_FACTOR,
                       max_iterations=iterations)


@dataclass(frozen=True)
class LossBreakdown:
    gan_d: float
    gan_g: float
    recon: float
    feat_match: float
    total_g: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)
