"""
Object Detection Module

Detector interface used by dataset expansion and the instance-aware
translation variants, with a fixture-driven stub and a torchvision RetinaNet
adapter.
"""

import json
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Union

import torch

from ..errors import DetectorError
from .records import Detection

logger = logging.getLogger(__name__)


class ObjectDetector(ABC):
    """
    Base class for detectors.

    Subclasses implement ``_predict``; ``detect`` validates the boxes against
    the image and returns them sorted by descending confidence.
    """

    def detect(self, image: torch.Tensor, image_id: Optional[str] = None) -> List[Detection]:
        """
        Detect objects in one image.

        Args:
            image: Tensor (3, H, W) with values in [-1, 1]
            image_id: Optional key identifying the image (its manifest path)

        Returns:
            Detections sorted by confidence, highest first
        """
        if image.dim() != 3:
            raise ValueError(f"Expected an image of shape (C, H, W), got {tuple(image.shape)}")
        height, width = image.shape[1], image.shape[2]
        detections = list(self._predict(image, image_id))
        for detection in detections:
            if not detection.fits(width, height):
                raise DetectorError(
                    f"Detection {detection.bbox} outside {width}x{height} image {image_id or ''}".rstrip()
                )
        return sorted(detections, key=lambda d: d.confidence, reverse=True)

    @abstractmethod
    def _predict(self, image: torch.Tensor, image_id: Optional[str]) -> Iterable[Detection]:
        """Raw detections for one image."""


class StubDetector(ObjectDetector):
    """Returns fixture boxes keyed by image id (``default`` for unknown ids)."""

    def __init__(self, fixtures: Optional[Mapping[str, Iterable[Detection]]] = None,
                 default: Optional[Iterable[Detection]] = None):
        self.fixtures: Dict[str, List[Detection]] = {
            key: list(value) for key, value in (fixtures or {}).items()
        }
        self.default: List[Detection] = list(default or [])

    def _predict(self, image: torch.Tensor, image_id: Optional[str]) -> Iterable[Detection]:
        if image_id is not None and image_id in self.fixtures:
            return list(self.fixtures[image_id])
        return list(self.default)

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> 'StubDetector':
        """
        Build a stub from a JSON file.

        The file maps image ids to lists of ``{"bbox": [...], "label": ..., "confidence": ...}``;
        the optional key ``"*"`` gives the default list.
        """
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"Detection fixture file not found: {path}")
        with open(path, 'r', encoding='utf-8') as handle:
            data = json.load(handle)
        fixtures = {
            key: [Detection.from_dict(item) for item in items]
            for key, items in data.items() if key != '*'
        }
        default = [Detection.from_dict(item) for item in data.get('*', [])]
        return cls(fixtures, default)


class TorchvisionRetinaNetDetector(ObjectDetector):
    """
    RetinaNet (ResNet-50 FPN) from torchvision with COCO labels.

    The model is built lazily on first use. Raw scores are returned without
    thresholding; expansion applies its own threshold.
    """

    def __init__(self, device: str = 'cpu', weights: Optional[str] = 'DEFAULT'):
        self.device = device
        self.weights = weights
        self._model = None
        self._labels: List[str] = []

    def _load(self):
        try:
            from torchvision.models.detection import (
                RetinaNet_ResNet50_FPN_Weights, retinanet_resnet50_fpn)
        except ImportError as e:
            raise DetectorError("torchvision is required for the RetinaNet detector") from e

        try:
            weights = RetinaNet_ResNet50_FPN_Weights.verify(self.weights) if self.weights else None
            self._model = retinanet_resnet50_fpn(weights=weights).to(self.device).eval()
        except Exception as e:
            raise DetectorError(f"Could not build RetinaNet: {e}") from e
        if weights is not None:
            self._labels = list(weights.meta['categories'])
        logger.info("Loaded RetinaNet detector on %s", self.device)

    def _predict(self, image: torch.Tensor, image_id: Optional[str]) -> Iterable[Detection]:
        if self._model is None:
            self._load()
        pixels = ((image.float() + 1.0) / 2.0).clamp(0.0, 1.0).to(self.device)
        try:
            with torch.no_grad():
                output = self._model([pixels])[0]
        except Exception as e:
            raise DetectorError(f"RetinaNet failed on {image_id or 'image'}: {e}") from e

        height, width = image.shape[1], image.shape[2]
        detections = []
        for box, label, score in zip(output['boxes'].tolist(), output['labels'].tolist(),
                                     output['scores'].tolist()):
            x_min, y_min = max(0.0, box[0]), max(0.0, box[1])
            x_max, y_max = min(float(width), box[2]), min(float(height), box[3])
            if x_max <= x_min or y_max <= y_min:
                continue
            name = self._labels[label] if label < len(self._labels) else str(label)
            detections.append(Detection((x_min, y_min, x_max, y_max), name, float(score)))
        return detections


DETECTORS = {
    'stub': StubDetector,
    'retinanet': TorchvisionRetinaNetDetector,
}


def build_detector(name: str, fixtures_path: Optional[Union[str, Path]] = None,
                   device: str = 'cpu') -> ObjectDetector:
    """Construct a detector by name ('stub' or 'retinanet')."""
    if name not in DETECTORS:
        raise DetectorError(f"Unknown detector: {name}")
    if name == 'stub':
        return StubDetector.from_json(fixtures_path) if fixtures_path else StubDetector()
    return TorchvisionRetinaNetDetector(device=device)
