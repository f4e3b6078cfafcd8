"""
Dataset Records Module

Value types for image catalogs: image records, manifests, detections and the
expansion configuration.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple, FrozenSet

from ..errors import ConfigError, ManifestError


CLASS_SEPARATOR = " - "


def normalize_class_name(name: str) -> str:
    """Lowercase a class name and collapse runs of whitespace to one space."""
    return " ".join(str(name).lower().split())


def object_class_name(domain: str, label: str) -> str:
    """Name of the class holding objects ``label`` cropped from ``domain`` images."""
    return normalize_class_name(f"{normalize_class_name(domain)}{CLASS_SEPARATOR}{normalize_class_name(label)}")


def class_domain(class_name: str) -> str:
    """Domain part of a class name ("sunny - car" -> "sunny", "night" -> "night")."""
    return class_name.split(CLASS_SEPARATOR, 1)[0]


@dataclass(frozen=True)
class ImageRecord:
    """One catalogued image."""

    path: str
    class_name: str
    width: int
    height: int

    def __post_init__(self):
        object.__setattr__(self, 'class_name', normalize_class_name(self.class_name))
        if not self.path:
            raise ManifestError("Image record has an empty path")
        if not self.class_name:
            raise ManifestError(f"Image record {self.path!r} has an empty class name")
        if self.width <= 0 or self.height <= 0:
            raise ManifestError(
                f"Image record {self.path!r} has invalid size {self.width}x{self.height}"
            )


@dataclass(frozen=True)
class DatasetManifest:
    """
    Ordered catalog of image records.

    The class index is derived from the records, so it always covers them
    exactly and never contains an empty class. A manifest with no records is
    only produced explicitly (see ``DatasetManifest.empty``).
    """

    records: Tuple[ImageRecord, ...]
    seed: int = 0
    class_index: Dict[str, Tuple[int, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, 'records', records)

        seen_paths = set()
        index: Dict[str, List[int]] = {}
        for i, record in enumerate(records):
            if record.path in seen_paths:
                raise ManifestError(f"Duplicate path in manifest: {record.path}")
            seen_paths.add(record.path)
            index.setdefault(record.class_name, []).append(i)

        object.__setattr__(self, 'class_index', {name: tuple(ids) for name, ids in index.items()})

    @classmethod
    def empty(cls, seed: int = 0) -> 'DatasetManifest':
        """Manifest with no records and no classes."""
        return cls(records=(), seed=seed)

    @property
    def is_empty(self) -> bool:
        return len(self.records) == 0

    @property
    def class_names(self) -> List[str]:
        """Class names in order of first appearance."""
        return list(self.class_index.keys())

    def records_of(self, class_name: str) -> List[ImageRecord]:
        """All records of one class, in manifest order."""
        ids = self.class_index.get(normalize_class_name(class_name))
        if ids is None:
            raise ManifestError(f"Unknown class: {class_name}")
        return [self.records[i] for i in ids]

    def with_records(self, records: Iterable[ImageRecord]) -> 'DatasetManifest':
        """New manifest sharing this one's seed."""
        return DatasetManifest(records=tuple(records), seed=self.seed)

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class Detection:
    """Bounding box (pixels), object label and confidence."""

    bbox: Tuple[float, float, float, float]
    label: str
    confidence: float

    def __post_init__(self):
        bbox = tuple(float(v) for v in self.bbox)
        if len(bbox) != 4:
            raise ValueError(f"Bounding box needs 4 coordinates, got {len(bbox)}")
        object.__setattr__(self, 'bbox', bbox)
        object.__setattr__(self, 'label', normalize_class_name(self.label))
        x_min, y_min, x_max, y_max = bbox
        if not (0 <= x_min < x_max and 0 <= y_min < y_max):
            raise ValueError(f"Degenerate bounding box: {bbox}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"Confidence must be in [0, 1], got {self.confidence}")

    @property
    def width(self) -> float:
        return self.bbox[2] - self.bbox[0]

    @property
    def height(self) -> float:
        return self.bbox[3] - self.bbox[1]

    def fits(self, width: int, height: int) -> bool:
        """Whether the box lies inside a ``width`` x ``height`` image."""
        return self.bbox[2] <= width and self.bbox[3] <= height

    def to_dict(self) -> Dict[str, object]:
        return {'bbox': list(self.bbox), 'label': self.label, 'confidence': self.confidence}

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> 'Detection':
        return cls(bbox=tuple(data['bbox']), label=str(data['label']),
                   confidence=float(data['confidence']))


@dataclass
class ExpansionConfig:
    """Settings for detection-based class expansion."""

    confidence_threshold: float = 0.5
    keep_list: Optional[FrozenSet[str]] = None
    include_whole_images: bool = False
    min_box_side: int = 16
    skip_failed_images: bool = False

    def __post_init__(self):
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ConfigError(
                f"confidence_threshold must be in [0, 1], got {self.confidence_threshold}"
            )
        if self.min_box_side < 1:
            raise ConfigError(f"min_box_side must be >= 1, got {self.min_box_side}")
        if self.keep_list is not None:
            self.keep_list = frozenset(normalize_class_name(name) for name in self.keep_list)
