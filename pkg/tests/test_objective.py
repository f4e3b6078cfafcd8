"""Tests for losses, batch sampling and the training loop."""

import json
import math
from dataclasses import replace

import numpy as np
import pytest
import torch

from src.core.data_manager import load_manifest
from src.core.dataset.synthetic import make_toy_dataset, synthetic_manifest
from src.core.errors import CheckpointMismatchError, ConfigError, ManifestError, TrainingDivergedError
from src.core.model import DiscriminatorConfig, GeneratorConfig, adain, build_models, load_checkpoint
from src.core.objective import (
    TrainConfig, Trainer, batch_rng, fine_tune, plot_training_log, sample_batch,
    summarize_training_log, train,
)
from src.core.objective.losses import (
    check_finite, discriminator_logistic_loss, feature_matching_loss, gan_loss_generator,
    generator_logistic_loss, reconstruction_loss, total_generator_loss,
)
from src.core.objective.sampling import sample_indices
from src.core.objective.trainer import LOSS_TERMS, TRAIN_LOG_NAME
from src.core.dataset import ImageLoader


def _states_close(a, b):
    return all(torch.allclose(a[k], b[k], atol=1e-12) for k in a)


class TestLosses:
    def test_logistic_values_at_zero(self):
        zero = torch.zeros(3, dtype=torch.float64)
        assert discriminator_logistic_loss(zero, zero).item() == pytest.approx(2 * math.log(2))
        assert generator_logistic_loss(zero).item() == pytest.approx(math.log(2))
        assert generator_logistic_loss(zero, 'saturating').item() == pytest.approx(-math.log(2))
        with pytest.raises(ValueError):
            generator_logistic_loss(zero, 'hinge')

    def test_total_is_weighted_sum(self):
        cfg = TrainConfig(lambda_r=0.1, lambda_f=1.0)
        total = total_generator_loss(torch.tensor(1.0), torch.tensor(2.0), torch.tensor(3.0), cfg)
        assert total.item() == pytest.approx(1.0 + 0.2 + 3.0)

    def test_non_finite_raises(self):
        with pytest.raises(TrainingDivergedError, match="iteration 3"):
            check_finite('recon', torch.tensor(float('nan')), 3)
        with pytest.raises(TrainingDivergedError):
            total_generator_loss(torch.tensor(float('inf')), torch.tensor(0.0), torch.tensor(0.0))

    def test_reconstruction_is_non_negative(self, models, make_image):
        G, _ = models
        assert reconstruction_loss(make_image(0), G).item() >= 0
        batch = torch.stack([make_image(0), make_image(1)])
        assert reconstruction_loss(batch, G).dim() == 0

    def test_feature_target_is_detached(self, models, make_image):
        _, D = models
        styles = torch.stack([make_image(1), make_image(2)]).requires_grad_(True)
        fake = make_image(0).requires_grad_(True)
        feature_matching_loss(fake, styles, D).backward()
        assert styles.grad is None
        assert fake.grad is not None

    def test_adain_gradient(self):
        torch.manual_seed(0)
        inputs = (torch.randn(1, 2, 3, 3, dtype=torch.float64, requires_grad=True),
                  torch.randn(1, 2, dtype=torch.float64, requires_grad=True),
                  torch.randn(1, 2, dtype=torch.float64, requires_grad=True))
        assert torch.autograd.gradcheck(adain, inputs)

    def test_generator_loss_gradient(self, models, make_image):
        _, D = models
        fake = make_image(0).unsqueeze(0).requires_grad_(True)
        classes = torch.tensor([1])
        assert torch.autograd.gradcheck(lambda x: gan_loss_generator(D, x, classes), (fake,))
        styles = [make_image(1), make_image(2)]
        assert torch.autograd.gradcheck(lambda x: feature_matching_loss(x[0], styles, D), (fake,))

    def test_total_loss_matches_finite_differences(self, models, make_image):
        G, D = models
        content = torch.stack([make_image(0), make_image(1)])
        styles = torch.stack([torch.stack([make_image(2), make_image(3)]),
                              torch.stack([make_image(4), make_image(5)])])
        style_classes = torch.tensor([1, 0])

        def total():
            fake = G.translate(content, styles)
            return total_generator_loss(gan_loss_generator(D, fake, style_classes),
                                        reconstruction_loss(content, G),
                                        feature_matching_loss(fake, styles, D))

        G.zero_grad()
        total().backward()
        eps = 1e-6
        checked = 0
        for _, param in list(G.named_parameters())[::3]:
            if param.grad is None:
                continue
            analytic = param.grad.view(-1)[0].item()
            with torch.no_grad():
                entry = param.view(-1)
                entry[0] += eps
                up = total().item()
                entry[0] -= 2 * eps
                down = total().item()
                entry[0] += eps
            assert (up - down) / (2 * eps) == pytest.approx(analytic, rel=1e-3, abs=1e-8)
            checked += 1
        assert checked >= 3


class TestSampling:
    def test_same_seed_and_iteration_same_batch(self):
        m = synthetic_manifest({'a': 5, 'b': 5, 'c': 1})
        first = sample_indices(m, 4, 2, batch_rng(3, 10))
        second = sample_indices(m, 4, 2, batch_rng(3, 10))
        for name in ('content_classes', 'content', 'style_classes', 'style'):
            assert np.array_equal(getattr(first, name), getattr(second, name))

    def test_samples_stay_in_their_class(self):
        m = synthetic_manifest({'a': 5, 'b': 5, 'c': 1})
        idx = sample_indices(m, 16, 2, batch_rng(0, 0))
        for i in range(16):
            content_class = m.class_names[idx.content_classes[i]]
            style_class = m.class_names[idx.style_classes[i]]
            assert m.records[idx.content[i]].class_name == content_class
            assert all(m.records[j].class_name == style_class for j in idx.style[i])
            if style_class != 'c':
                assert len(set(idx.style[i])) == 2

    def test_classes_are_drawn_uniformly(self):
        m = synthetic_manifest({'a': 50, 'b': 5, 'c': 1})
        n = 10_000
        idx = sample_indices(m, n, 1, batch_rng(0, 0))
        sigma = math.sqrt((1 / 3) * (2 / 3) / n)
        for drawn in (idx.content_classes, idx.style_classes):
            frequencies = np.bincount(drawn, minlength=3) / n
            assert np.all(np.abs(frequencies - 1 / 3) <= 3 * sigma)

    def test_single_class(self):
        with pytest.raises(ManifestError):
            sample_indices(synthetic_manifest({'a': 3}), 2, 1, batch_rng(0, 0))

    def test_loaded_batch_shapes(self, toy_root):
        manifest = load_manifest(toy_root / 'manifest.tsv')
        cfg = TrainConfig(batch_size=3, k_shot=2)
        batch = sample_batch(manifest, cfg, batch_rng(0, 0), ImageLoader(toy_root, size=8))
        assert batch.content.shape == (3, 3, 8, 8)
        assert batch.style.shape == (3, 2, 3, 8, 8)
        assert batch.style_classes.dtype == torch.long


class TestTrainConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(learning_rate=0)
        with pytest.raises(ConfigError):
            TrainConfig(gan_mode='hinge')
        with pytest.raises(ConfigError):
            TrainConfig(k_shot=0)

    def test_fine_tuning_settings(self):
        ft = TrainConfig().for_fine_tuning()
        assert ft.learning_rate == pytest.approx(1e-5)
        assert ft.max_iterations == 250_000

    def test_dict_ignores_unknown_keys(self):
        cfg = TrainConfig(batch_size=2)
        assert TrainConfig.from_dict({**cfg.to_dict(), 'legacy': 1}) == cfg


class TestTrainer:
    def test_zero_learning_rate_keeps_parameters(self, models, train_cfg, toy_root):
        G, D = models
        manifest = load_manifest(toy_root / 'manifest.tsv')
        trainer = Trainer(G, D, train_cfg, manifest.class_names)
        trainer.set_learning_rate(0.0)
        before = {k: v.clone() for k, v in G.state_dict().items()}
        losses = trainer.step(manifest, ImageLoader(toy_root, size=8, dtype=torch.float64))
        assert trainer.iteration == 1
        assert _states_close(before, G.state_dict())
        assert all(math.isfinite(v) for v in losses.to_dict().values())

    def test_discriminator_updates_before_generator(self, models, train_cfg, toy_root):
        G, D = models
        manifest = load_manifest(toy_root / 'manifest.tsv')
        trainer = Trainer(G, D, train_cfg, manifest.class_names)
        for group in trainer.gen_opt.param_groups:
            group['lr'] = 0.0
        g_before = {k: v.clone() for k, v in G.state_dict().items()}
        d_before = {k: v.clone() for k, v in D.state_dict().items()}
        trainer.step(manifest, ImageLoader(toy_root, size=8, dtype=torch.float64))
        assert _states_close(g_before, G.state_dict())
        assert not _states_close(d_before, D.state_dict())
        assert all(p.grad is None for p in D.parameters())

    def test_class_count_must_match_heads(self, models, train_cfg):
        G, D = models
        with pytest.raises(CheckpointMismatchError):
            Trainer(G, D, train_cfg, ['a', 'b', 'c'])


class TestTraining:
    def test_log_and_checkpoints(self, models, train_cfg, toy_root, tmp_path):
        G, D = models
        manifest = load_manifest(toy_root / 'manifest.tsv')
        out = tmp_path / 'run'
        ckpt = train(G, D, manifest, train_cfg, out, data_root=toy_root)
        assert ckpt.iteration == 4
        assert (out / 'latest.pt').exists()
        assert (out / 'ckpt_00000002.pt').exists()
        assert (out / 'ckpt_00000004.pt').exists()

        lines = (out / TRAIN_LOG_NAME).read_text(encoding='utf-8').splitlines()
        records = [json.loads(line) for line in lines]
        assert [r['iteration'] for r in records] == [1, 2, 3, 4]
        assert set(LOSS_TERMS) <= set(records[0])

        summary = summarize_training_log(out / TRAIN_LOG_NAME, window=2)
        assert list(summary.index) == list(LOSS_TERMS)
        assert plot_training_log(out / TRAIN_LOG_NAME, out / 'losses.png').exists()

    def test_resume_matches_uninterrupted_run(self, gen_cfg, dis_cfg, train_cfg, toy_root, tmp_path):
        manifest = load_manifest(toy_root / 'manifest.tsv')
        G, D = build_models(gen_cfg, dis_cfg, seed=0, dtype=torch.float64)
        full = train(G, D, manifest, train_cfg, tmp_path / 'full', data_root=toy_root)

        halfway = load_checkpoint(tmp_path / 'full' / 'ckpt_00000002.pt')
        G2, D2 = build_models(gen_cfg, dis_cfg, seed=99, dtype=torch.float64)
        resumed = train(G2, D2, manifest, train_cfg, tmp_path / 'resumed', data_root=toy_root,
                        resume_from=halfway)
        assert resumed.iteration == 4
        assert _states_close(full.generator_state, resumed.generator_state)
        assert _states_close(full.discriminator_state, resumed.discriminator_state)

    def test_resume_rejects_other_model_config(self, gen_cfg, dis_cfg, train_cfg, toy_root, tmp_path):
        manifest = load_manifest(toy_root / 'manifest.tsv')
        G, D = build_models(gen_cfg, dis_cfg, seed=0, dtype=torch.float64)
        halfway = train(G, D, manifest, replace(train_cfg, max_iterations=1), tmp_path / 'a',
                        data_root=toy_root)
        G2, D2 = build_models(replace(gen_cfg, style_dim=4), dis_cfg, seed=0, dtype=torch.float64)
        with pytest.raises(CheckpointMismatchError, match="Generator"):
            train(G2, D2, manifest, train_cfg, tmp_path / 'b', data_root=toy_root, resume_from=halfway)
        G3, D3 = build_models(gen_cfg, replace(dis_cfg, n_layers=1), seed=0, dtype=torch.float64)
        with pytest.raises(CheckpointMismatchError, match="Discriminator"):
            train(G3, D3, manifest, train_cfg, tmp_path / 'c', data_root=toy_root, resume_from=halfway)
        assert not (tmp_path / 'b' / 'latest.pt').exists()

    def test_nothing_to_do(self, models, train_cfg, toy_root, tmp_path):
        G, D = models
        manifest = load_manifest(toy_root / 'manifest.tsv')
        ckpt = train(G, D, manifest, replace(train_cfg, max_iterations=0), tmp_path / 'zero',
                     data_root=toy_root)
        assert ckpt.iteration == 0
        assert (tmp_path / 'zero' / 'latest.pt').exists()
        assert not (tmp_path / 'zero' / TRAIN_LOG_NAME).exists()

    def test_fine_tune(self, models, train_cfg, toy_root, tmp_path):
        G, D = models
        manifest = load_manifest(toy_root / 'manifest.tsv')
        base = train(G, D, manifest, replace(train_cfg, max_iterations=2), tmp_path / 'base',
                     data_root=toy_root)
        tuned = fine_tune(base, manifest, iterations=2, checkpoint_dir=tmp_path / 'ft', data_root=toy_root)
        assert tuned.iteration == 2
        assert tuned.metadata['fine_tuned_from_iteration'] == 2
        assert tuned.train_config['learning_rate'] == pytest.approx(train_cfg.learning_rate * 0.1)
        for group in tuned.generator_optimizer['param_groups']:
            assert group['lr'] == pytest.approx(train_cfg.learning_rate * 0.1)

    def test_fine_tune_keeps_optimizer_state(self, models, train_cfg, toy_root, tmp_path):
        G, D = models
        manifest = load_manifest(toy_root / 'manifest.tsv')
        base = train(G, D, manifest, replace(train_cfg, max_iterations=2), tmp_path / 'base',
                     data_root=toy_root)
        tuned = fine_tune(base, manifest, iterations=0, checkpoint_dir=tmp_path / 'ft', data_root=toy_root)
        assert _states_close(base.generator_state, tuned.generator_state)
        assert _states_close(base.discriminator_state, tuned.discriminator_state)
        for opt in ('generator_optimizer', 'discriminator_optimizer'):
            stored, carried = getattr(base, opt)['state'], getattr(tuned, opt)['state']
            assert stored.keys() == carried.keys() and stored
            for key in stored:
                assert torch.equal(stored[key]['square_avg'], carried[key]['square_avg'])

        reset = fine_tune(base, manifest, iterations=0, checkpoint_dir=tmp_path / 'ft_heads',
                          reinit_heads=True, data_root=toy_root)
        assert reset.discriminator_optimizer['state'] == {}
        assert reset.generator_optimizer['state'].keys() == base.generator_optimizer['state'].keys()

    def test_fine_tune_new_classes(self, models, train_cfg, toy_root, tmp_path):
        G, D = models
        manifest = load_manifest(toy_root / 'manifest.tsv')
        base = train(G, D, manifest, replace(train_cfg, max_iterations=1), tmp_path / 'base',
                     data_root=toy_root)
        three = make_toy_dataset(tmp_path / 'three', classes=('red', 'blue', 'green'),
                                 n_per_class=3, size=8)
        with pytest.raises(CheckpointMismatchError):
            fine_tune(base, three, iterations=1, checkpoint_dir=tmp_path / 'ft', data_root=tmp_path / 'three')
        tuned = fine_tune(base, three, iterations=1, checkpoint_dir=tmp_path / 'ft',
                          reinit_heads=True, data_root=tmp_path / 'three')
        assert tuned.discriminator_config['n_classes'] == 3
        assert tuned.class_names == ('red', 'blue', 'green')

    def test_too_few_classes(self, models, train_cfg, tmp_path):
        G, D = models
        with pytest.raises(ManifestError):
            train(G, D, synthetic_manifest({'a': 3}), train_cfg, tmp_path / 'x')


@pytest.mark.slow
def test_toy_losses_decrease(tmp_path):
    manifest = make_toy_dataset(tmp_path / 'toy', classes=('red', 'blue'), n_per_class=32, size=32)
    G, D = build_models(GeneratorConfig.for_image_size(32), DiscriminatorConfig(n_classes=2), seed=0)
    cfg = TrainConfig(batch_size=4, k_shot=1, max_iterations=500, checkpoint_interval=500)
    train(G, D, manifest, cfg, tmp_path / 'run', data_root=tmp_path / 'toy')

    summary = summarize_training_log(tmp_path / 'run' / TRAIN_LOG_NAME, window=100)
    assert summary.loc['total_g', 'relative_decrease'] >= 0.3
    assert summary.loc['recon', 'relative_decrease'] >= 0.5


class TestZeroCases:
    def test_feature_matching_zero_for_matching_features(self, models, make_image):
        _, D = models
        x = make_image(0)
        assert feature_matching_loss(x, [x, x], D).item() == pytest.approx(0.0, abs=1e-12)

    def test_perfect_discriminator(self):
        real = torch.full((2,), 60.0, dtype=torch.float64)
        fake = torch.full((2,), -60.0, dtype=torch.float64)
        assert discriminator_logistic_loss(real, fake).item() == pytest.approx(0.0, abs=1e-20)

    def test_identity_generator_reconstructs(self, make_image):
        class Identity:
            def translate(self, x, styles):
                return x.clone()

        assert reconstruction_loss(make_image(0), Identity()).item() == 0.0

    def test_reconstruction_gradient(self, models, make_image):
        G, _ = models
        x = make_image(0).requires_grad_(True)
        assert torch.autograd.gradcheck(lambda t: reconstruction_loss(t, G), (x,))
