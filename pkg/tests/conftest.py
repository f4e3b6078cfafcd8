"""Shared fixtures: micro model configurations and small on-disk datasets."""

import pytest
import torch

from src.core.dataset.synthetic import make_toy_dataset
from src.core.model import DiscriminatorConfig, GeneratorConfig, build_models
from src.core.objective import TrainConfig


@pytest.fixture
def gen_cfg():
    return GeneratorConfig(image_size=8, base_channels=4, n_downsample=2, n_content_res_blocks=1,
                           style_dim=8, n_adain_res_blocks=1, n_mlp_layers=2, mlp_dim=16)


@pytest.fixture
def dis_cfg():
    return DiscriminatorConfig(n_classes=2, base_channels=4, n_layers=2, max_channels=16)


@pytest.fixture
def models(gen_cfg, dis_cfg):
    return build_models(gen_cfg, dis_cfg, seed=0, dtype=torch.float64)


@pytest.fixture
def train_cfg():
    return TrainConfig(batch_size=2, k_shot=2, max_iterations=4, checkpoint_interval=2,
                       log_interval=1, dtype='float64')


@pytest.fixture
def toy_root(tmp_path):
    root = tmp_path / 'toy'
    make_toy_dataset(root, classes=('red', 'blue'), n_per_class=6, size=8, seed=0)
    return root


def random_image(seed: int, size: int = 8, dtype=torch.float64) -> torch.Tensor:
    generator = torch.Generator().manual_seed(seed)
    return (torch.rand(3, size, size, generator=generator, dtype=dtype) * 2 - 1)


@pytest.fixture
def make_image():
    return random_image
