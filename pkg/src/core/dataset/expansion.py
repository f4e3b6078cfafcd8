"""
Dataset Expansion Module

Creates object classes from detections: every confident detection in an image
of domain C becomes a crop in class "C - <object>".
"""

import hashlib
import logging
import math
import os
from pathlib import Path
from typing import List, Tuple, Union

from tqdm import tqdm

from ..errors import DetectorError
from .curation import filter_classes
from .detection import ObjectDetector
from .images import load_image, save_image
from .records import DatasetManifest, Detection, ExpansionConfig, ImageRecord, object_class_name

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def pixel_box(detection: Detection, width: int, height: int) -> Tuple[int, int, int, int]:
    """Integer crop window covering the box (floor of min corner, ceil of max corner)."""
    x_min, y_min, x_max, y_max = detection.bbox
    return (max(0, int(math.floor(x_min))), max(0, int(math.floor(y_min))),
            min(width, int(math.ceil(x_max))), min(height, int(math.ceil(y_max))))


def crop_filename(record: ImageRecord, box: Tuple[int, int, int, int]) -> str:
    """Deterministic crop name: source stem, a digest of the full source path and the box."""
    stem = Path(record.path).stem
    digest = hashlib.sha1(record.path.encode("utf-8")).hexdigest()[:8]
    return f"{stem}_{digest}_{box[0]}_{box[1]}_{box[2]}_{box[3]}.png"


def keeps_detection(detection: Detection, cfg: ExpansionConfig) -> bool:
    """Confidence strictly above the threshold and both box sides >= min_box_side."""
    return (detection.confidence > cfg.confidence_threshold
            and detection.width >= cfg.min_box_side
            and detection.height >= cfg.min_box_side)


def _check_writable(crop_dir: Path):
    try:
        crop_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"Crop directory {crop_dir} is not writable: {e}") from e
    if not os.access(crop_dir, os.W_OK):
        raise OSError(f"Crop directory {crop_dir} is not writable")


def expand_dataset(manifest: DatasetManifest, detector: ObjectDetector, cfg: ExpansionConfig,
                   crop_dir: PathLike, data_root: PathLike = '.',
                   show_progress: bool = False) -> DatasetManifest:
    """
    Expand a manifest with object crops.

    Args:
        manifest: Source manifest; its class names are the domains
        detector: Detector run on every source image
        cfg: Threshold, size filter, whole-image and keep-list settings
        crop_dir: Crops are written to ``crop_dir/<class_name>/``
        data_root: Directory the manifest paths are relative to; crop record
            paths are written relative to it as well
        show_progress: Display a progress bar

    Returns:
        Expanded manifest (filtered by ``cfg.keep_list`` when one is set)

    Raises:
        OSError: crop_dir not writable
        DetectorError: detector failure while ``cfg.skip_failed_images`` is off
    """
    crop_dir = Path(crop_dir)
    data_root = Path(data_root)
    _check_writable(crop_dir)

    records: List[ImageRecord] = []
    produced = set()
    skipped = 0
    for record in tqdm(manifest.records, desc="Detecting objects", disable=not show_progress):
        if cfg.include_whole_images:
            records.append(record)

        source = record.path if Path(record.path).is_absolute() else data_root / record.path
        try:
            image = load_image(source)
            detections = detector.detect(image, image_id=record.path)
        except (DetectorError, OSError) as e:
            if not cfg.skip_failed_images:
                raise DetectorError(f"Detection failed on {record.path}: {e}") from e
            logger.warning("Skipping %s: %s", record.path, e)
            skipped += 1
            continue

        height, width = image.shape[1], image.shape[2]
        for detection in detections:
            if not keeps_detection(detection, cfg):
                continue
            class_name = object_class_name(record.class_name, detection.label)
            box = pixel_box(detection, width, height)
            target = crop_dir / class_name / crop_filename(record, box)
            relative = Path(os.path.relpath(target, data_root)).as_posix()
            if relative in produced:
                logger.debug("Duplicate box %s on %s ignored", box, record.path)
                continue
            produced.add(relative)
            save_image(image[:, box[1]:box[3], box[0]:box[2]], target)
            records.append(ImageRecord(
                path=relative,
                class_name=class_name,
                width=box[2] - box[0],
                height=box[3] - box[1],
            ))

    if skipped:
        logger.warning("Skipped %d images after detector failures", skipped)

    expanded = manifest.with_records(records)
    logger.info("Expansion produced %d records in %d classes",
                len(expanded), len(expanded.class_names))
    if cfg.keep_list is not None:
        expanded = filter_classes(expanded, cfg.keep_list)
    return expanded

