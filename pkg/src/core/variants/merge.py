"""
Instance-Aware Translation Module

Two inference-time compositions of the generator with an object detector:

- paste-back merge: translate the whole image, translate every detected
  object crop separately and paste the results over the global translation;
- latent merge: write the content codes of the detected objects into the
  global content code and decode once.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import torch
import torch.nn.functional as F

from ..dataset.detection import ObjectDetector
from ..dataset.expansion import pixel_box
from ..dataset.records import Detection
from ..errors import ConfigError
from ..model.generator import AdaINParams, FewShotGenerator, StyleImages

logger = logging.getLogger(__name__)

Box = Tuple[int, int, int, int]


@dataclass
class MergeConfig:
    """Object handling of the instance-aware variants."""

    feather_width: int = 0
    max_objects: int = 8

    def __post_init__(self):
        if self.feather_width < 0:
            raise ConfigError(f"feather_width must be >= 0, got {self.feather_width}")
        if self.max_objects < 0:
            raise ConfigError(f"max_objects must be >= 0, got {self.max_objects}")


def resize(tensor: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """Bilinear resize of a (C, H, W) tensor; returned unchanged when already that size."""
    if tensor.shape[-2:] == (height, width):
        return tensor
    return F.interpolate(tensor.unsqueeze(0), size=(height, width), mode='bilinear',
                         align_corners=False)[0]


def select_detections(image: torch.Tensor, detector: ObjectDetector, cfg: MergeConfig,
                      image_id: Optional[str] = None) -> List[Detection]:
    """Up to ``max_objects`` most confident detections, in ascending confidence (paste) order."""
    detections = detector.detect(image, image_id=image_id)[:cfg.max_objects]
    return list(reversed(detections))


def feather_mask(height: int, width: int, feather_width: int,
                 dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """(H, W) blending weights ramping from the box border to 1 over ``feather_width`` pixels."""
    if feather_width == 0:
        return torch.ones(height, width, dtype=dtype)
    ys = torch.arange(height, dtype=dtype)
    xs = torch.arange(width, dtype=dtype)
    dy = torch.minimum(ys + 1, height - ys)
    dx = torch.minimum(xs + 1, width - xs)
    distance = torch.minimum(dy[:, None], dx[None, :])
    return (distance / (feather_width + 1)).clamp(max=1.0)


def translate_crop(crop: torch.Tensor, params: AdaINParams, generator: FewShotGenerator) -> torch.Tensor:
    """Translate a crop at generator resolution and resize the result back to the crop size."""
    size = generator.cfg.image_size
    translated = generator.decode(generator.encode_content(resize(crop, size, size)), params)
    return resize(translated, crop.shape[-2], crop.shape[-1])


@torch.no_grad()
def translate_detect_merge(x: torch.Tensor, images: StyleImages, detector: ObjectDetector,
                           generator: FewShotGenerator, cfg: Optional[MergeConfig] = None,
                           image_id: Optional[str] = None) -> torch.Tensor:
    """
    Paste-back merge.

    Every object crop is translated with the same style set as the whole
    image and written over the global translation at its original location.
    Objects are pasted in ascending confidence, so the most confident object
    wins where boxes overlap.

    Args:
        x: Content image (C, H, W) at generator resolution
        images: Style set accepted by ``FewShotGenerator.encode_style``
        detector: Object detector run on ``x``
        generator: Trained generator
        cfg: Feathering and object cap
        image_id: Passed to the detector

    Returns:
        Image with the shape of ``x``
    """
    cfg = cfg or MergeConfig()
    params = generator.compute_adain_params(generator.encode_style(images))
    output = generator.decode(generator.encode_content(x), params).clone()
    height, width = x.shape[-2:]

    for detection in select_detections(x, detector, cfg, image_id):
        x0, y0, x1, y1 = pixel_box(detection, width, height)
        translated = translate_crop(x[:, y0:y1, x0:x1], params, generator)
        if cfg.feather_width == 0:
            output[:, y0:y1, x0:x1] = translated
        else:
            mask = feather_mask(y1 - y0, x1 - x0, cfg.feather_width, dtype=output.dtype)
            region = output[:, y0:y1, x0:x1]
            output[:, y0:y1, x0:x1] = mask * translated + (1 - mask) * region
    return output


def map_box_to_latent(bbox: Sequence[float], factor: int, code_height: int, code_width: int) -> Box:
    """Content-code cells covered by a pixel box: floor of min corner, ceil of max corner, clamped."""
    x_min, y_min, x_max, y_max = bbox
    return (
        min(max(0, math.floor(x_min / factor)), code_width),
        min(max(0, math.floor(y_min / factor)), code_height),
        min(max(0, math.ceil(x_max / factor)), code_width),
        min(max(0, math.ceil(y_max / factor)), code_height),
    )


def merge_latent_codes(global_code: torch.Tensor,
                       object_codes: Sequence[Tuple[Box, torch.Tensor]]) -> torch.Tensor:
    """
    Write object content codes into a copy of the global code.

    Each object code is resized to its region; regions are written in the
    given order. Cells outside every region keep the global values.
    """
    merged = global_code.clone()
    for (x0, y0, x1, y1), code in object_codes:
        merged[:, y0:y1, x0:x1] = resize(code, y1 - y0, x1 - x0)
    return merged


def latent_merge_code(x: torch.Tensor, detections: Sequence[Detection],
                      generator: FewShotGenerator) -> torch.Tensor:
    """Global content code of ``x`` with every detected object's code written into its region."""
    global_code = generator.encode_content(x)
    code_h, code_w = global_code.shape[-2:]
    height, width = x.shape[-2:]
    size = generator.cfg.image_size

    object_codes = []
    for detection in detections:
        region = map_box_to_latent(detection.bbox, generator.cfg.downsample_factor, code_h, code_w)
        if region[2] <= region[0] or region[3] <= region[1]:
            logger.warning("Detection %s at %s maps to an empty latent region; skipped",
                           detection.label, detection.bbox)
            continue
        x0, y0, x1, y1 = pixel_box(detection, width, height)
        crop_code = generator.encode_content(resize(x[:, y0:y1, x0:x1], size, size))
        object_codes.append((region, crop_code))
    return merge_latent_codes(global_code, object_codes)


@torch.no_grad()
def translate_latent_merge(x: torch.Tensor, images: StyleImages, detector: ObjectDetector,
                           generator: FewShotGenerator, cfg: Optional[MergeConfig] = None,
                           image_id: Optional[str] = None) -> torch.Tensor:
    """
    Latent merge: one decode of the merged content code with the global style.

    Object regions are written in ascending confidence, so the most
    confident object wins where regions overlap.
    """
    cfg = cfg or MergeConfig()
    detections = select_detections(x, detector, cfg, image_id)
    params = generator.compute_adain_params(generator.encode_style(images))
    return generator.decode(latent_merge_code(x, detections, generator), params)


VARIANTS = {
    'paste': translate_detect_merge,
    'latent': translate_latent_merge,
}
