"""
Trainer Module

Alternating discriminator/generator updates with RMSprop, periodic
checkpoints, a JSON-lines training log, resumption and fine-tuning.
"""

import json
import logging
import time
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import pandas as pd
import seaborn as sns
import torch
from tqdm import tqdm

from ..dataset.images import ImageLoader
from ..dataset.records import DatasetManifest
from ..errors import CheckpointMismatchError, ManifestError
from ..model.checkpoint import Checkpoint, checkpoint_path, make_checkpoint, restore_models, save_checkpoint
from ..model.config import DiscriminatorConfig, GeneratorConfig
from ..model.discriminator import ClassConditionalDiscriminator
from ..model.generator import FewShotGenerator
from .config import FINE_TUNE_ITERATIONS, LossBreakdown, TrainConfig
from .losses import (
    check_finite, feature_matching_loss, gan_loss_discriminator, gan_loss_generator,
    reconstruction_loss, total_generator_loss,
)
from .sampling import TrainingBatch, batch_rng, sample_batch, warn_small_classes

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
ImageSource = Callable[[str], torch.Tensor]

TRAIN_LOG_NAME = 'train_log.jsonl'
LOSS_TERMS = ('gan_d', 'gan_g', 'recon', 'feat_match', 'total_g')


class Trainer:
    """
    Owns a generator/discriminator pair and their optimizers.

    A Trainer must be the only writer of its models' parameters while it
    trains.
    """

    def __init__(self, generator: FewShotGenerator, discriminator: ClassConditionalDiscriminator,
                 cfg: TrainConfig, class_names: Sequence[str], iteration: int = 0):
        if len(class_names) != discriminator.n_classes:
            raise CheckpointMismatchError(
                f"{len(class_names)} classes for a discriminator with {discriminator.n_classes} heads"
            )
        self.cfg = cfg
        self.class_names = tuple(class_names)
        self.generator = generator.to(cfg.torch_dtype)
        self.discriminator = discriminator.to(cfg.torch_dtype)
        self.iteration = iteration
        self.gen_opt = self._make_optimizer(self.generator)
        self.dis_opt = self._make_optimizer(self.discriminator)

    def _make_optimizer(self, module: torch.nn.Module) -> torch.optim.RMSprop:
        return torch.optim.RMSprop(module.parameters(), lr=self.cfg.learning_rate,
                                   alpha=self.cfg.rms_alpha, eps=self.cfg.rms_eps)

    def set_learning_rate(self, lr: float):
        for opt in (self.gen_opt, self.dis_opt):
            for group in opt.param_groups:
                group['lr'] = lr

    # ------------------------------------------------------------------ #
    # Updates
    # ------------------------------------------------------------------ #

    def generator_losses(self, batch: TrainingBatch):
        """Generator loss terms as tensors: (gan_g, recon, feat_match, total_g)."""
        G, D = self.generator, self.discriminator
        fake = G.translate(batch.content, batch.style)
        gan_g = gan_loss_generator(D, fake, batch.style_classes, self.cfg.gan_mode)
        recon = reconstruction_loss(batch.content, G)
        feat = feature_matching_loss(fake, batch.style, D)
        total = total_generator_loss(gan_g, recon, feat, self.cfg)
        return gan_g, recon, feat, total

    def train_step(self, batch: TrainingBatch) -> LossBreakdown:
        """One discriminator update, then one generator update."""
        G, D = self.generator, self.discriminator
        G.train()
        D.train()

        self.dis_opt.zero_grad(set_to_none=True)
        with torch.no_grad():
            fake = G.translate(batch.content, batch.style)
        loss_d = gan_loss_discriminator(D, batch.content, batch.content_classes, fake, batch.style_classes)
        check_finite('gan_d', loss_d, self.iteration)
        loss_d.backward()
        self.dis_opt.step()

        self.gen_opt.zero_grad(set_to_none=True)
        gan_g, recon, feat, total = self.generator_losses(batch)
        for name, value in zip(LOSS_TERMS[1:], (gan_g, recon, feat, total)):
            check_finite(name, value, self.iteration)
        total.backward()
        self.gen_opt.step()
        # generator backward also reaches D; those gradients are discarded
        self.dis_opt.zero_grad(set_to_none=True)

        self.iteration += 1
        return LossBreakdown(
            gan_d=loss_d.item(),
            gan_g=gan_g.item(),
            recon=recon.item(),
            feat_match=feat.item(),
            total_g=total.item(),
        )

    def step(self, train: DatasetManifest, loader: ImageSource) -> LossBreakdown:
        batch = sample_batch(train, self.cfg, batch_rng(self.cfg.seed, self.iteration), loader,
                             self.class_names)
        batch = TrainingBatch(
            content=batch.content.to(self.cfg.torch_dtype),
            content_classes=batch.content_classes,
            style=batch.style.to(self.cfg.torch_dtype),
            style_classes=batch.style_classes,
            indices=batch.indices,
        )
        return self.train_step(batch)

    # ------------------------------------------------------------------ #
    # Checkpoints
    # ------------------------------------------------------------------ #

    def checkpoint(self, metadata: Optional[dict] = None) -> Checkpoint:
        return make_checkpoint(
            self.generator, self.discriminator, self.class_names, self.iteration,
            self.gen_opt, self.dis_opt, self.cfg.to_dict(), metadata,
        )

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint, cfg: Optional[TrainConfig] = None,
                        gen_cfg: Optional[GeneratorConfig] = None,
                        dis_cfg: Optional[DiscriminatorConfig] = None) -> 'Trainer':
        """
        Restore models, optimizer state and iteration counter.

        Raises:
            CheckpointMismatchError: ``gen_cfg`` / ``dis_cfg`` given and different
                from the stored model configuration
        """
        cfg = cfg or TrainConfig.from_dict(checkpoint.train_config)
        generator, discriminator = restore_models(checkpoint, gen_cfg, dis_cfg, dtype=cfg.torch_dtype)
        trainer = cls(generator, discriminator, cfg, checkpoint.class_names, checkpoint.iteration)
        if checkpoint.generator_optimizer is not None:
            trainer.gen_opt.load_state_dict(checkpoint.generator_optimizer)
        if checkpoint.discriminator_optimizer is not None:
            trainer.dis_opt.load_state_dict(checkpoint.discriminator_optimizer)
        # the stored state carries the old learning rate
        trainer.set_learning_rate(cfg.learning_rate)
        return trainer


def _run(trainer: Trainer, train_manifest: DatasetManifest, checkpoint_dir: PathLike,
         loader: ImageSource, metadata: Optional[dict], show_progress: bool) -> Checkpoint:
    cfg = trainer.cfg
    checkpoint_dir = Path(checkpoint_dir)
    checkpoint_dir.mkdir(parents=True, exist_ok=True)
    log_path = checkpoint_dir / TRAIN_LOG_NAME

    if trainer.iteration >= cfg.max_iterations:
        logger.info("Nothing to train: iteration %d >= max_iterations %d",
                    trainer.iteration, cfg.max_iterations)
        checkpoint = trainer.checkpoint(metadata)
        save_checkpoint(checkpoint, checkpoint_path(checkpoint_dir))
        return checkpoint

    logger.info("Training %d classes from iteration %d to %d (lr=%g, lambda_r=%g, lambda_f=%g)",
                len(trainer.class_names), trainer.iteration, cfg.max_iterations,
                cfg.learning_rate, cfg.lambda_r, cfg.lambda_f)
    start = time.perf_counter()
    with open(log_path, 'a', encoding='utf-8') as log_file:
        for _ in tqdm(range(trainer.iteration, cfg.max_iterations), desc="Training",
                      disable=not show_progress):
            losses = trainer.step(train_manifest, loader)
            record = {'iteration': trainer.iteration, **losses.to_dict(),
                      'wall_time': round(time.perf_counter() - start, 6)}
            log_file.write(json.dumps(record) + '\n')
            log_file.flush()

            if trainer.iteration % cfg.log_interval == 0:
                logger.info("iter %d: gan_d=%.4f gan_g=%.4f recon=%.4f feat=%.4f total_g=%.4f",
                            trainer.iteration, losses.gan_d, losses.gan_g, losses.recon,
                            losses.feat_match, losses.total_g)
            if trainer.iteration % cfg.checkpoint_interval == 0:
                checkpoint = trainer.checkpoint(metadata)
                save_checkpoint(checkpoint, checkpoint_path(checkpoint_dir, trainer.iteration))
                save_checkpoint(checkpoint, checkpoint_path(checkpoint_dir))

    checkpoint = trainer.checkpoint(metadata)
    save_checkpoint(checkpoint, checkpoint_path(checkpoint_dir))
    logger.info("Training finished at iteration %d", trainer.iteration)
    return checkpoint


def _default_loader(generator: FewShotGenerator, cfg: TrainConfig, data_root: PathLike) -> ImageLoader:
    return ImageLoader(data_root, size=generator.cfg.image_size, dtype=cfg.torch_dtype)


def train(generator: FewShotGenerator, discriminator: ClassConditionalDiscriminator,
          train_manifest: DatasetManifest, cfg: TrainConfig, checkpoint_dir: PathLike,
          loader: Optional[ImageSource] = None, data_root: PathLike = '.',
          resume_from: Optional[Checkpoint] = None, show_progress: bool = False) -> Checkpoint:
    """
    Train for ``cfg.max_iterations`` total iterations.

    Args:
        generator, discriminator: Initial models; when resuming only their
            configurations are used and must match the checkpoint
        train_manifest: Training images; head i belongs to class_names[i]
        cfg: Training hyperparameters
        checkpoint_dir: Receives ``latest.pt``, periodic ``ckpt_*.pt`` files
            and the append-only ``train_log.jsonl``
        loader: Maps record paths to image tensors; defaults to an
            ImageLoader over ``data_root`` at the generator resolution
        resume_from: Continue from this checkpoint's iteration and
            optimizer state

    Returns:
        Final checkpoint

    Raises:
        CheckpointMismatchError: resuming with other classes or other model
            configurations than the checkpoint
    """
    if len(train_manifest.class_names) < 2:
        raise ManifestError(f"Training needs at least 2 classes, got {len(train_manifest.class_names)}")
    warn_small_classes(train_manifest, cfg.k_shot)

    if resume_from is not None:
        if tuple(resume_from.class_names) != tuple(train_manifest.class_names):
            raise CheckpointMismatchError("Checkpoint classes differ from the training manifest classes")
        trainer = Trainer.from_checkpoint(resume_from, cfg, generator.cfg, discriminator.cfg)
    else:
        trainer = Trainer(generator, discriminator, cfg, train_manifest.class_names)

    loader = loader or _default_loader(trainer.generator, cfg, data_root)
    return _run(trainer, train_manifest, checkpoint_dir, loader, None, show_progress)


def fine_tune(checkpoint: Checkpoint, manifest: DatasetManifest, iterations: int = FINE_TUNE_ITERATIONS,
              checkpoint_dir: PathLike = 'finetune', cfg: Optional[TrainConfig] = None,
              reinit_heads: bool = False, loader: Optional[ImageSource] = None,
              data_root: PathLike = '.', show_progress: bool = False) -> Checkpoint:
    """
    Continue training a checkpoint on a new manifest with a ten times smaller learning rate.

    Args:
        checkpoint: Starting parameters and optimizer state
        manifest: Fine-tuning images
        iterations: Number of fine-tuning steps
        cfg: Base configuration; defaults to the checkpoint's training config
        reinit_heads: Replace the discriminator head for the manifest's
            classes and reset the discriminator optimizer

    Raises:
        CheckpointMismatchError: class count differs and ``reinit_heads`` is off
    """
    base = cfg or TrainConfig.from_dict(checkpoint.train_config)
    ft_cfg = base.for_fine_tuning(iterations)
    class_names = manifest.class_names
    if len(class_names) < 2:
        raise ManifestError(f"Fine-tuning needs at least 2 classes, got {len(class_names)}")

    trainer = Trainer.from_checkpoint(checkpoint, ft_cfg)
    trainer.iteration = 0
    if reinit_heads:
        trainer.discriminator.reset_head(len(class_names), seed=ft_cfg.seed)
        trainer.class_names = tuple(class_names)
        trainer.dis_opt = trainer._make_optimizer(trainer.discriminator)
    elif len(class_names) != len(checkpoint.class_names):
        raise CheckpointMismatchError(
            f"Manifest has {len(class_names)} classes, checkpoint has {len(checkpoint.class_names)}; "
            "re-initialize the discriminator heads to fine-tune on it"
        )
    elif tuple(class_names) != tuple(checkpoint.class_names):
        logger.warning("Manifest class names differ from the checkpoint; heads are matched by position")
        trainer.class_names = tuple(class_names)

    warn_small_classes(manifest, ft_cfg.k_shot)
    metadata = {
        **checkpoint.metadata,
        'fine_tune_iterations': iterations,
        'fine_tune_learning_rate': ft_cfg.learning_rate,
        'fine_tuned_from_iteration': checkpoint.iteration,
        'reinit_heads': reinit_heads,
    }
    loader = loader or _default_loader(trainer.generator, ft_cfg, data_root)
    return _run(trainer, manifest, checkpoint_dir, loader, metadata, show_progress)


# ---------------------------------------------------------------------- #
# Training log analysis
# ---------------------------------------------------------------------- #

def read_training_log(path: PathLike) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Training log not found: {path}")
    return pd.read_json(path, lines=True)


def summarize_training_log(path: PathLike, window: int = 100) -> pd.DataFrame:
    """
    Moving averages of each loss term at the start and end of training.

    Returns:
        DataFrame indexed by loss term with columns first_avg, last_avg and
        relative_decrease ((first - last) / first)
    """
    frame = read_training_log(path)
    if frame.empty:
        raise ValueError(f"Training log {path} is empty")
    window = max(1, min(window, len(frame)))
    rows = {}
    for term in LOSS_TERMS:
        rolling = frame[term].rolling(window).mean()
        first, last = rolling.iloc[window - 1], rolling.iloc[-1]
        rows[term] = {
            'first_avg': first,
            'last_avg': last,
            'relative_decrease': (first - last) / first if first != 0 else 0.0,
        }
    return pd.DataFrame.from_dict(rows, orient='index')


def format_training_summary(summary: pd.DataFrame, title: str = "Training Summary") -> str:
    report = f"{title}\n" + "=" * len(title) + "\n\n"
    for term, row in summary.iterrows():
        report += (f"{term}: {row['first_avg']:.4f} -> {row['last_avg']:.4f} "
                   f"({100 * row['relative_decrease']:.1f}% decrease)\n")
    return report


def plot_training_log(path: PathLike, out_png: PathLike, window: int = 100) -> Path:
    """Line plot of the moving average of every loss term."""
    frame = read_training_log(path)
    window = max(1, min(window, len(frame)))
    smoothed = frame.set_index('iteration')[list(LOSS_TERMS)].rolling(window, min_periods=1).mean()
    long = smoothed.reset_index().melt(id_vars='iteration', var_name='term', value_name='loss')

    fig, ax = plt.subplots(figsize=(8, 5))
    sns.lineplot(data=long, x='iteration', y='loss', hue='term', ax=ax)
    ax.set_title(f"Loss moving average (window {window})")
    ax.grid(True, alpha=0.3)
    out_png = Path(out_png)
    out_png.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_png, dpi=150, bbox_inches='tight')
    plt.close(fig)
    return out_png
