"""
Synthetic Data Module

Record-only manifests with prescribed class sizes, and a small toy image
dataset of color-tinted shapes used for smoke training.
"""

from pathlib import Path
from typing import Dict, Mapping, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from ..data_manager import save_manifest
from ..errors import ConfigError
from .records import DatasetManifest, ImageRecord

# Per-class image counts of the four-domain street subset
STREET_DOMAIN_COUNTS: Dict[str, int] = {
    'cloudy': 12723,
    'sunny': 10678,
    'rainy': 2226,
    'night': 6705,
}

TOY_TINTS: Dict[str, Tuple[int, int, int]] = {
    'red': (220, 60, 50),
    'blue': (50, 80, 220),
    'green': (60, 190, 80),
    'yellow': (230, 200, 40),
}


def synthetic_manifest(counts: Mapping[str, int], seed: int = 0,
                       width: int = 1920, height: int = 1280) -> DatasetManifest:
    """Manifest with ``counts[c]`` records per class and no image files behind it."""
    records = [
        ImageRecord(f"{name}/{name}_{i:06d}.jpg", name, width, height)
        for name, count in counts.items()
        for i in range(count)
    ]
    return DatasetManifest(records=tuple(records), seed=seed)


def _draw_shape(rng: np.random.Generator, size: int, tint: Tuple[int, int, int]) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    background = rng.integers(0, 60, size=3)
    image = np.empty((size, size, 3), dtype=np.float64)
    image[:] = background

    cx, cy = rng.uniform(size * 0.3, size * 0.7, size=2)
    radius = rng.uniform(size * 0.15, size * 0.3)
    if rng.random() < 0.5:
        mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2
    else:
        mask = (np.abs(xx - cx) <= radius) & (np.abs(yy - cy) <= radius)

    shade = rng.uniform(0.7, 1.0)
    image[mask] = np.asarray(tint, dtype=np.float64) * shade
    return np.clip(image, 0, 255).astype(np.uint8)


def make_toy_dataset(root: Union[str, Path], classes: Sequence[str] = ('red', 'blue'),
                     n_per_class: int = 32, size: int = 32, seed: int = 0) -> DatasetManifest:
    """
    Write a toy dataset of tinted shapes.

    Args:
        root: Output directory; images go to ``root/<class>/`` and the
            manifest to ``root/manifest.tsv``
        classes: Class names, each a key of ``TOY_TINTS``
        n_per_class: Images per class
        size: Square image side in pixels
        seed: Seed for shapes and their placement

    Returns:
        The written manifest (paths relative to ``root``)
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    records = []
    for name in classes:
        if name not in TOY_TINTS:
            raise ConfigError(f"Unknown toy class {name!r}; choose from {', '.join(TOY_TINTS)}")
        (root / name).mkdir(parents=True, exist_ok=True)
        for i in range(n_per_class):
            relative = f"{name}/{name}_{i:04d}.png"
            Image.fromarray(_draw_shape(rng, size, TOY_TINTS[name]), mode='RGB').save(root / relative)
            records.append(ImageRecord(relative, name, size, size))

    manifest = DatasetManifest(records=tuple(records), seed=seed)
    save_manifest(manifest, root / 'manifest.tsv')
    return manifest
