"""
Dataset Core Module

Image catalogs and their curation: loading, unseen-class splits, balancing,
detection-driven class expansion and keep-list filtering.
"""

from .records import (
    DatasetManifest, Detection, ExpansionConfig, ImageRecord,
    class_domain, normalize_class_name, object_class_name,
)
from .curation import balance_classes, filter_classes, split_by_class, split_by_domain
from .detection import ObjectDetector, StubDetector, TorchvisionRetinaNetDetector, build_detector
from .expansion import expand_dataset
from .images import ImageLoader, load_image, save_image

__all__ = [
    'DatasetManifest',
    'Detection',
    'ExpansionConfig',
    'ImageRecord',
    'class_domain',
    'normalize_class_name',
    'object_class_name',
    'balance_classes',
    'filter_classes',
    'split_by_class',
    'split_by_domain',
    'ObjectDetector',
    'StubDetector',
    'TorchvisionRetinaNetDetector',
    'build_detector',
    'expand_dataset',
    'ImageLoader',
    'load_image',
    'save_image',
]
