"""
Dataset Curation Module

Unseen-class splits, class balancing and keep-list filtering. Every function
is a pure function of its inputs and the manifest seed.
"""

import logging
import zlib
from typing import Iterable, Set, Tuple

import numpy as np

from ..errors import ConfigError, ManifestError
from .records import DatasetManifest, class_domain, normalize_class_name

logger = logging.getLogger(__name__)


def _normalized_set(names: Iterable[str]) -> Set[str]:
    return {normalize_class_name(name) for name in names}


def split_by_class(manifest: DatasetManifest,
                   test_classes: Iterable[str]) -> Tuple[DatasetManifest, DatasetManifest]:
    """
    Partition a manifest so no class appears in both halves.

    Args:
        manifest: Manifest to split
        test_classes: Classes held out for few-shot testing

    Returns:
        (train, test) manifests; with no test classes the test manifest is
        ``DatasetManifest.empty``

    Raises:
        ManifestError: unknown test class, or every class held out
    """
    test = _normalized_set(test_classes)
    unknown = sorted(test - set(manifest.class_names))
    if unknown:
        raise ManifestError(f"Unknown test classes: {', '.join(unknown)}")
    if test and test == set(manifest.class_names):
        raise ManifestError("Every class is held out for testing; the training set would be empty")

    if not test:
        return manifest, DatasetManifest.empty(seed=manifest.seed)

    train_records = [r for r in manifest.records if r.class_name not in test]
    test_records = [r for r in manifest.records if r.class_name in test]
    logger.info("Split %d records: %d train / %d test (%d held-out classes)",
                len(manifest), len(train_records), len(test_records), len(test))
    return manifest.with_records(train_records), manifest.with_records(test_records)


def split_by_domain(manifest: DatasetManifest,
                    test_domains: Iterable[str]) -> Tuple[DatasetManifest, DatasetManifest]:
    """
    Hold out every class of the given domains.

    "night" selects both the whole-image class "night" and every object class
    "night - <object>".
    """
    domains = _normalized_set(test_domains)
    present = {class_domain(name) for name in manifest.class_names}
    unknown = sorted(domains - present)
    if unknown:
        raise ManifestError(f"Unknown test domains: {', '.join(unknown)}")
    test_classes = [name for name in manifest.class_names if class_domain(name) in domains]
    return split_by_class(manifest, test_classes)


def _class_rng(seed: int, class_name: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(class_name.encode('utf-8'))])


def balance_classes(manifest: DatasetManifest, per_class: int) -> DatasetManifest:
    """
    Cap every class at ``per_class`` records.

    Classes above the cap keep a uniform sample drawn without replacement from
    a generator seeded by (manifest seed, class name); smaller classes are kept
    whole. Retained records stay in manifest order.
    """
    if per_class <= 0:
        raise ConfigError(f"per_class must be >= 1, got {per_class}")

    keep = []
    for name, ids in manifest.class_index.items():
        if len(ids) <= per_class:
            keep.extend(ids)
        else:
            chosen = _class_rng(manifest.seed, name).choice(len(ids), size=per_class, replace=False)
            keep.extend(ids[i] for i in chosen)
            logger.debug("Balanced class %r: %d -> %d", name, len(ids), per_class)

    return manifest.with_records(manifest.records[i] for i in sorted(keep))


def filter_classes(manifest: DatasetManifest, keep_list: Iterable[str]) -> DatasetManifest:
    """
    Keep only records whose class is in ``keep_list``.

    Raises:
        ManifestError: when nothing survives the filter
    """
    keep = _normalized_set(keep_list)
    records = [r for r in manifest.records if r.class_name in keep]
    if not records:
        raise ManifestError("No records left after filtering with the keep-list")
    result = manifest.with_records(records)
    logger.info("Keep-list filter: %d -> %d classes",
                len(manifest.class_names), len(result.class_names))
    return result
