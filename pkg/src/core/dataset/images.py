"""
Image I/O Module

Conversion between image files and float tensors in [-1, 1], channel-first.
"""

import logging
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import torch
from PIL import Image

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def pil_to_tensor(image: Image.Image) -> torch.Tensor:
    """RGB PIL image -> float32 tensor (3, H, W) in [-1, 1]."""
    array = np.asarray(image.convert('RGB'), dtype=np.float32)
    return torch.from_numpy(array / 127.5 - 1.0).permute(2, 0, 1).contiguous()


def tensor_to_pil(tensor: torch.Tensor) -> Image.Image:
    """Tensor (3, H, W) in [-1, 1] -> RGB PIL image."""
    if tensor.dim() == 4:
        if tensor.size(0) != 1:
            raise ValueError(f"Expected a single image, got batch of {tensor.size(0)}")
        tensor = tensor[0]
    array = ((tensor.detach().cpu().double().clamp(-1.0, 1.0) + 1.0) * 127.5).round()
    array = array.to(torch.uint8).permute(1, 2, 0).numpy()
    return Image.fromarray(array, mode='RGB')


def load_image(path: PathLike, size: Optional[int] = None) -> torch.Tensor:
    """
    Load an image file.

    Args:
        path: Image path
        size: If given, resize to ``size`` x ``size`` (bilinear)

    Returns:
        Float tensor (3, H, W) with values in [-1, 1]
    """
    with Image.open(path) as image:
        image = image.convert('RGB')
        if size is not None and image.size != (size, size):
            image = image.resize((size, size), Image.BILINEAR)
        return pil_to_tensor(image)


def save_image(tensor: torch.Tensor, path: PathLike) -> Path:
    """Write a tensor as a lossless PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensor_to_pil(tensor).save(path, format='PNG')
    return path


class ImageLoader:
    """Loads manifest images relative to a data root, caching decoded tensors."""

    def __init__(self, data_root: PathLike = '.', size: Optional[int] = None,
                 dtype: torch.dtype = torch.float32, cache: bool = True):
        self.data_root = Path(data_root)
        self.size = size
        self.dtype = dtype
        self.cache_enabled = cache
        self._cache: Dict[str, torch.Tensor] = {}

    def resolve(self, relative_path: str) -> Path:
        path = Path(relative_path)
        return path if path.is_absolute() else self.data_root / path

    def __call__(self, relative_path: str) -> torch.Tensor:
        if relative_path in self._cache:
            return self._cache[relative_path]
        tensor = load_image(self.resolve(relative_path), self.size).to(self.dtype)
        if self.cache_enabled:
            self._cache[relative_path] = tensor
        return tensor
