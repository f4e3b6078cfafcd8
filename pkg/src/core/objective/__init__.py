"""
Objective Core Module

Adversarial, reconstruction and feature matching losses, batch sampling and
the training loop.
"""

from .config import FINE_TUNE_ITERATIONS, LossBreakdown, TrainConfig
from .losses import (
    feature_matching_loss, gan_loss_discriminator, gan_loss_generator,
    reconstruction_loss, total_generator_loss,
)
from .sampling import TrainingBatch, batch_rng, sample_batch
from .trainer import (
    Trainer, fine_tune, format_training_summary, plot_training_log,
    summarize_training_log, train,
)

__all__ = [
    'FINE_TUNE_ITERATIONS',
    'LossBreakdown',
    'TrainConfig',
    'feature_matching_loss',
    'gan_loss_discriminator',
    'gan_loss_generator',
    'reconstruction_loss',
    'total_generator_loss',
    'TrainingBatch',
    'batch_rng',
    'sample_batch',
    'Trainer',
    'fine_tune',
    'format_training_summary',
    'plot_training_log',
    'summarize_training_log',
    'train',
]
