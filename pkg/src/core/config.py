"""
Run Configuration Module

Aggregates the per-module configurations into one RunConfig, reads and
writes it as a flat ``section.key = value`` file, and provides the presets
of the experiment phases.
"""

import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .dataset.records import ExpansionConfig, normalize_class_name
from .errors import ConfigError
from .evaluation.protocol import EvalProtocol
from .model.config import DiscriminatorConfig, GeneratorConfig
from .objective.config import TrainConfig
from .variants.merge import MergeConfig

logger = logging.getLogger(__name__)

RUN_CONFIG_VERSION = 1
DATA_ROOT_ENV = 'FEWSHOT_DATA_ROOT'
RUN_CONFIG_NAME = 'run_config.txt'

PathLike = Union[str, Path]

# Fields holding a collection of names; a single value in the file is a one-element list
COLLECTION_FIELDS = {'test_classes', 'test_domains', 'keep_list'}


def default_data_root() -> str:
    return os.environ.get(DATA_ROOT_ENV, '.')


@dataclass
class CurationConfig:
    """Unseen-class split and balancing of a manifest."""

    test_classes: Tuple[str, ...] = ()
    test_domains: Tuple[str, ...] = ()
    balance: Optional[int] = None
    keep_list_path: Optional[str] = None

    def __post_init__(self):
        self.test_classes = tuple(normalize_class_name(c) for c in self.test_classes)
        self.test_domains = tuple(normalize_class_name(d) for d in self.test_domains)
        if self.balance is not None and self.balance < 1:
            raise ConfigError(f"balance must be >= 1, got {self.balance}")


@dataclass
class RunConfig:
    """Resolved configuration of one command invocation."""

    seed: int = 0
    data_root: str = field(default_factory=default_data_root)
    out_dir: str = 'runs'
    curation: CurationConfig = field(default_factory=CurationConfig)
    expansion: ExpansionConfig = field(default_factory=ExpansionConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    evaluation: EvalProtocol = field(default_factory=EvalProtocol)
    merge: MergeConfig = field(default_factory=MergeConfig)
    version: int = RUN_CONFIG_VERSION


SECTIONS = ('curation', 'expansion', 'generator', 'discriminator', 'train', 'evaluation', 'merge')
RUN_KEYS = ('version', 'seed', 'data_root', 'out_dir')


# Experiment phases: held-out classes, balancing and iteration counts of the reported runs
PHASE_PRESETS: Dict[str, Dict[str, Any]] = {
    'phase1': {
        'curation.test_classes': ('rainy',),
    },
    # no iteration count is reported for the rainy run; the TrainConfig default applies
    'phase2-rainy': {
        'curation.test_classes': ('rainy',),
    },
    'phase2-night': {
        'curation.test_classes': ('night',),
        'train.max_iterations': 500_000,
    },
    'phase2-night-470k': {
        'curation.test_classes': ('night',),
        'train.max_iterations': 470_000,
    },
    'phase3-balanced': {
        'curation.test_classes': ('night',),
        'curation.balance': 2226,
        'train.max_iterations': 483_000,
    },
    'retinanet': {
        'curation.test_domains': ('night',),
        'curation.keep_list_path': 'sample_data/keep_list_97.txt',
        'expansion.confidence_threshold': 0.5,
        'train.max_iterations': 500_000,
    },
}


# ---------------------------------------------------------------------- #
# Values
# ---------------------------------------------------------------------- #

def parse_value(text: str) -> Any:
    """Parse a flat-file value: none, bool, int, float, comma list or string."""
    text = text.strip()
    if text == '' or text.lower() == 'none':
        return None
    if text.lower() in ('true', 'false'):
        return text.lower() == 'true'
    if ',' in text:
        return tuple(parse_value(part) for part in text.split(',') if part.strip())
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def format_value(value: Any) -> str:
    if value is None:
        return 'none'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (tuple, list, frozenset, set)):
        items = sorted(value) if isinstance(value, (frozenset, set)) else value
        return ', '.join(format_value(v) for v in items)
    return str(value)


def _coerce(name: str, value: Any, current: Any) -> Any:
    if name in COLLECTION_FIELDS:
        if value is None:
            return None if name == 'keep_list' else ()
        return value if isinstance(value, tuple) else (value,)
    if isinstance(current, bool) or value is None:
        return value
    if isinstance(current, float) and isinstance(value, int):
        return float(value)
    if isinstance(current, str) and not isinstance(value, str):
        return format_value(value)
    return value


def apply_overrides(cfg: RunConfig, overrides: Dict[str, Any]) -> RunConfig:
    """
    Return a copy of ``cfg`` with ``section.key`` overrides applied.

    Raises:
        ConfigError: unknown section or key, or a value violating a
            configuration invariant
    """
    grouped: Dict[str, Dict[str, Any]] = {}
    top: Dict[str, Any] = {}
    for dotted, value in overrides.items():
        section, _, key = dotted.partition('.')
        if section == 'run' and key in RUN_KEYS:
            top[key] = _coerce(key, value, getattr(cfg, key))
            continue
        if section not in SECTIONS or not key:
            raise ConfigError(f"Unknown configuration key: {dotted}")
        current = getattr(cfg, section)
        if key not in {f.name for f in fields(current)}:
            raise ConfigError(f"Unknown configuration key: {dotted}")
        grouped.setdefault(section, {})[key] = _coerce(key, value, getattr(current, key))

    updates: Dict[str, Any] = dict(top)
    for section, values in grouped.items():
        try:
            updates[section] = replace(getattr(cfg, section), **values)
        except TypeError as e:
            raise ConfigError(f"Invalid values for section {section}: {e}") from e
    return replace(cfg, **updates)


def apply_preset(cfg: RunConfig, name: str) -> RunConfig:
    if name not in PHASE_PRESETS:
        raise ConfigError(f"Unknown preset {name!r}; choose from {', '.join(PHASE_PRESETS)}")
    logger.info("Applying preset %s", name)
    return apply_overrides(cfg, PHASE_PRESETS[name])


# ---------------------------------------------------------------------- #
# Flat file
# ---------------------------------------------------------------------- #

def flatten_run_config(cfg: RunConfig) -> List[Tuple[str, Any]]:
    """``(section.key, value)`` pairs in a fixed order."""
    items = [(f"run.{key}", getattr(cfg, key)) for key in RUN_KEYS]
    for section in SECTIONS:
        obj = getattr(cfg, section)
        items += [(f"{section}.{f.name}", getattr(obj, f.name)) for f in fields(obj)]
    return items


def write_run_config(cfg: RunConfig, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# Run configuration (section.key = value)"]
    lines += [f"{key} = {format_value(value)}" for key, value in flatten_run_config(cfg)]
    path.write_text("\n".join(lines) + "\n", encoding='utf-8')
    return path


def read_overrides(path: PathLike) -> Dict[str, Any]:
    """Parse a flat config file into ``section.key`` -> value."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    overrides: Dict[str, Any] = {}
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith('#'):
                continue
            key, sep, value = line.partition('=')
            if not sep or not key.strip():
                raise ConfigError(f"{path}:{line_number}: expected 'section.key = value'")
            overrides[key.strip()] = parse_value(value)
    return overrides


def load_run_config(path: PathLike, base: Optional[RunConfig] = None) -> RunConfig:
    """Read a flat config file on top of ``base`` (defaults when omitted)."""
    overrides = read_overrides(path)
    version = overrides.get('run.version', RUN_CONFIG_VERSION)
    if version != RUN_CONFIG_VERSION:
        raise ConfigError(f"Unsupported run config version {version!r}")
    return apply_overrides(base or RunConfig(), overrides)
