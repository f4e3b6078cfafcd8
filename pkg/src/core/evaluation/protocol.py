"""
Evaluation Protocol Module

For every source class: sample content images, translate each of them
n_pairs times with two independently drawn style sets of the target class,
and report the mean LPIPS between the two translations of each pair and the
Inception Score of all translations.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import torch
from tqdm import tqdm

from ..dataset.records import DatasetManifest, normalize_class_name
from ..errors import ConfigError, ManifestError
from .inception import Classifier, inception_score
from .lpips import FeatureBackbone, lpips
from .report import MetricReport, MetricRow

logger = logging.getLogger(__name__)

ImageSource = Callable[[str], torch.Tensor]


@dataclass
class EvalProtocol:
    n_content_per_class: int = 20
    n_pairs: int = 5
    k_style: int = 2
    target_class: str = 'night'
    seed: int = 0
    is_splits: int = 1

    def __post_init__(self):
        self.target_class = normalize_class_name(self.target_class)
        for name in ('n_content_per_class', 'n_pairs', 'k_style', 'is_splits'):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.target_class:
            raise ConfigError("target_class must not be empty")

    @property
    def translations_per_class(self) -> int:
        return self.n_content_per_class * self.n_pairs * 2

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _draw(rng: np.random.Generator, pool: Sequence[int], size: int) -> np.ndarray:
    return rng.choice(np.asarray(pool), size=size, replace=len(pool) < size)


def _warn_if_small(pool: Sequence[int], size: int, what: str):
    if len(pool) < size:
        logger.warning("Only %d %s for %d draws; sampling with replacement", len(pool), what, size)


def run_protocol(model, train_manifest: DatasetManifest, style_manifest: DatasetManifest,
                 protocol: EvalProtocol, loader: ImageSource, backbone: FeatureBackbone,
                 classifier: Classifier, model_id: str = 'model',
                 source_classes: Optional[Sequence[str]] = None,
                 show_progress: bool = False) -> MetricReport:
    """
    Run the translation protocol.

    Args:
        model: Object with ``translate(x, style_images)``
        train_manifest: Source images; its classes are the source classes
            unless ``source_classes`` is given
        style_manifest: Must contain ``protocol.target_class``
        protocol: Sample counts, style-set size, target class and seed
        loader: Maps a record path to an image tensor
        backbone: LPIPS feature backbone
        classifier: Inception Score classifier
        model_id: Echoed in the report

    Returns:
        MetricReport with one row per source class

    Raises:
        ManifestError: target class missing, or an unknown source class
    """
    target = protocol.target_class
    if target not in style_manifest.class_index:
        raise ManifestError(f"Target class {target!r} not in the style manifest")
    style_pool = style_manifest.class_index[target]

    if source_classes is None:
        classes = [c for c in train_manifest.class_names if c != target]
    else:
        classes = [normalize_class_name(c) for c in source_classes]
    unknown = [c for c in classes if c not in train_manifest.class_index]
    if unknown:
        raise ManifestError(f"Unknown source classes: {', '.join(unknown)}")
    if not classes:
        raise ManifestError("No source classes to evaluate")

    _warn_if_small(style_pool, protocol.k_style, f"style images of {target!r}")
    rows: List[MetricRow] = []
    with torch.no_grad():
        for position, name in enumerate(tqdm(classes, desc="Evaluating", disable=not show_progress)):
            rng = np.random.default_rng([protocol.seed, position])
            pool = train_manifest.class_index[name]
            _warn_if_small(pool, protocol.n_content_per_class, f"content images of {name!r}")
            content_ids = _draw(rng, pool, protocol.n_content_per_class)

            translations = []
            distances = []
            for content_id in content_ids:
                x = loader(train_manifest.records[content_id].path)
                for _ in range(protocol.n_pairs):
                    pair = []
                    for _ in range(2):
                        style_ids = _draw(rng, style_pool, protocol.k_style)
                        styles = [loader(style_manifest.records[i].path) for i in style_ids]
                        pair.append(model.translate(x, styles))
                    distances.append(float(lpips(pair[0], pair[1], backbone)))
                    translations.extend(pair)

            rows.append(MetricRow(
                source_class=name,
                lpips=float(np.mean(distances)),
                inception_score=inception_score(translations, classifier, protocol.is_splits),
                n_pairs=len(distances),
                n_images=len(translations),
            ))
            logger.info("%s -> %s: LPIPS %.4f, IS %.4f over %d translations",
                        name, target, rows[-1].lpips, rows[-1].inception_score, len(translations))

    return MetricReport(
        rows=tuple(rows),
        k_style=protocol.k_style,
        seed=protocol.seed,
        model_id=model_id,
        target_class=target,
    )
