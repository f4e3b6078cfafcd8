"""
Command Handlers

Each ``cmd_*`` function receives the parsed arguments and the resolved
RunConfig, writes its outputs under ``out_dir`` and returns an exit code.
"""

import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import torch

from ..core.config import (
    RUN_CONFIG_NAME, RunConfig, apply_overrides, apply_preset, load_run_config,
    parse_value, read_overrides, write_run_config,
)
from ..core.data_manager import (
    class_counts, load_keep_list, load_manifest, save_manifest, summarize_manifest,
)
from ..core.dataset import (
    ImageLoader, balance_classes, build_detector, expand_dataset, filter_classes,
    load_image, save_image, split_by_class, split_by_domain,
)
from ..core.dataset.synthetic import make_toy_dataset
from ..core.errors import ConfigError, FewShotError, ManifestError
from ..core.evaluation import BACKBONES, CLASSIFIERS, merge_reports, run_protocol, write_report
from ..core.evaluation.report import format_report
from ..core.model import GeneratorConfig, build_models, load_checkpoint, restore_models
from ..core.objective import (
    FINE_TUNE_ITERATIONS, TrainConfig, fine_tune, format_training_summary,
    plot_training_log, summarize_training_log, train,
)
from ..core.objective.trainer import TRAIN_LOG_NAME
from ..core.variants import VARIANTS
from .parser import build_parser

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# argparse destination -> config key
FLAG_KEYS = {
    'seed': 'run.seed',
    'data_root': 'run.data_root',
    'out_dir': 'run.out_dir',
    'test_classes': 'curation.test_classes',
    'test_domains': 'curation.test_domains',
    'balance': 'curation.balance',
    'keep_list': 'curation.keep_list_path',
    'threshold': 'expansion.confidence_threshold',
    'min_box_side': 'expansion.min_box_side',
    'include_whole_images': 'expansion.include_whole_images',
    'skip_failed': 'expansion.skip_failed_images',
    'batch_size': 'train.batch_size',
    'k_shot': 'train.k_shot',
    'lr': 'train.learning_rate',
    'lambda_r': 'train.lambda_r',
    'lambda_f': 'train.lambda_f',
    'gan_mode': 'train.gan_mode',
    'checkpoint_interval': 'train.checkpoint_interval',
    'log_interval': 'train.log_interval',
    'dtype': 'train.dtype',
    'iterations': 'train.max_iterations',
    'feather': 'merge.feather_width',
    'max_objects': 'merge.max_objects',
    'target': 'evaluation.target_class',
    'n_content': 'evaluation.n_content_per_class',
    'n_pairs': 'evaluation.n_pairs',
}
LIST_FLAGS = {'test_classes', 'test_domains'}


# ---------------------------------------------------------------------- #
# Setup
# ---------------------------------------------------------------------- #

def setup_logging(verbose: bool = False, log_file: Optional[Path] = None):
    """Configure the root logger for stderr and, optionally, a log file."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding='utf-8'))
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format=LOG_FORMAT, handlers=handlers, force=True)


def flag_overrides(args) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if dest in LIST_FLAGS:
            value = tuple(v.strip() for v in value.split(',') if v.strip())
        overrides[key] = value
    image_size = getattr(args, 'image_size', None)
    if image_size is not None:
        layout = GeneratorConfig.for_image_size(image_size)
        overrides['generator.image_size'] = layout.image_size
        overrides['generator.n_downsample'] = layout.n_downsample
    for item in args.overrides:
        key, sep, value = item.partition('=')
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = parse_value(value)
    return overrides


def resolve_config(args, base: Optional[RunConfig] = None) -> RunConfig:
    """Defaults, then config file, then preset, then flags; later sources win."""
    cfg = base or RunConfig()
    if args.config:
        cfg = load_run_config(args.config, cfg)
    if args.preset:
        cfg = apply_preset(cfg, args.preset)
    return apply_overrides(cfg, flag_overrides(args))


def manifest_seed(args, cfg: RunConfig) -> Optional[int]:
    """The run seed when a flag, --set or the config file gives one; None keeps the manifest's own."""
    given = flag_overrides(args)
    if args.config:
        given.update(read_overrides(args.config))
    return cfg.seed if 'run.seed' in given else None


def start_run(args, cfg: RunConfig) -> Path:
    """Create out_dir, attach run.log and record the resolved configuration."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    setup_logging(args.verbose, out_dir / 'run.log')
    write_run_config(cfg, out_dir / RUN_CONFIG_NAME)
    logger.info("%s: outputs in %s", args.command, out_dir)
    return out_dir


def _print_counts(label: str, counts: Dict[str, int]):
    print(f"{label}: {sum(counts.values())} records in {len(counts)} classes")


# ---------------------------------------------------------------------- #
# Commands
# ---------------------------------------------------------------------- #

def cmd_toy(args, cfg: RunConfig) -> int:
    out_dir = start_run(args, cfg)
    classes = [c.strip() for c in args.classes.split(',') if c.strip()]
    manifest = make_toy_dataset(out_dir, classes=classes, n_per_class=args.n_per_class,
                                size=args.size, seed=cfg.seed)
    print(summarize_manifest(manifest, "Toy Dataset"))
    print(f"manifest: {out_dir / 'manifest.tsv'}")
    return 0


def cmd_curate(args, cfg: RunConfig) -> int:
    manifest = load_manifest(args.manifest, seed=manifest_seed(args, cfg))
    out_dir = start_run(args, cfg)
    cur = cfg.curation

    if cur.keep_list_path:
        manifest = filter_classes(manifest, load_keep_list(cur.keep_list_path))
    if cur.balance is not None:
        manifest = balance_classes(manifest, cur.balance)
    if cur.test_domains and cur.test_classes:
        raise ConfigError("Give either test classes or test domains, not both")
    if cur.test_domains:
        train_m, test_m = split_by_domain(manifest, cur.test_domains)
    else:
        train_m, test_m = split_by_class(manifest, cur.test_classes)

    save_manifest(train_m, out_dir / 'train.tsv')
    if not test_m.is_empty:
        save_manifest(test_m, out_dir / 'test.tsv')

    print(summarize_manifest(train_m, "Train Classes"))
    if not test_m.is_empty:
        print(summarize_manifest(test_m, "Test Classes"))
    _print_counts("train", class_counts(train_m))
    _print_counts("test", class_counts(test_m))
    return 0


def cmd_expand(args, cfg: RunConfig) -> int:
    manifest = load_manifest(args.manifest, seed=manifest_seed(args, cfg))
    out_dir = start_run(args, cfg)
    detector = build_detector(args.detector, args.fixtures, args.device)
    crop_dir = Path(args.crop_dir) if args.crop_dir else out_dir / 'crops'

    expansion = replace(cfg.expansion, keep_list=None)
    expanded = expand_dataset(manifest, detector, expansion, crop_dir,
                              data_root=cfg.data_root, show_progress=args.progress)
    print(f"classes before filter: {len(expanded.class_names)}")

    keep_list = cfg.expansion.keep_list
    if cfg.curation.keep_list_path:
        keep_list = load_keep_list(cfg.curation.keep_list_path)
    if keep_list is not None and not expanded.is_empty:
        expanded = filter_classes(expanded, keep_list)
    print(f"classes after filter: {len(expanded.class_names)}")

    save_manifest(expanded, out_dir / 'expanded.tsv')
    print(summarize_manifest(expanded, "Expanded Classes"))
    return 0


def _report_training(out_dir: Path, plot: bool):
    log_path = out_dir / TRAIN_LOG_NAME
    if not log_path.exists() or log_path.stat().st_size == 0:
        return
    print(format_training_summary(summarize_training_log(log_path)))
    if plot:
        print(f"loss curve: {plot_training_log(log_path, out_dir / 'losses.png')}")


def _echo_hyperparameters(train_cfg: TrainConfig):
    print(f"lr={train_cfg.learning_rate:g} lambda_r={train_cfg.lambda_r:g} "
          f"lambda_f={train_cfg.lambda_f:g} batch_size={train_cfg.batch_size} "
          f"k={train_cfg.k_shot} iterations={train_cfg.max_iterations}")


def cmd_train(args, cfg: RunConfig) -> int:
    manifest = load_manifest(args.manifest)
    out_dir = start_run(args, cfg)
    train_cfg = replace(cfg.train, seed=cfg.seed)
    _echo_hyperparameters(train_cfg)

    resume = load_checkpoint(args.resume) if args.resume else None
    dis_cfg = replace(cfg.discriminator, n_classes=len(manifest.class_names))
    generator, discriminator = build_models(cfg.generator, dis_cfg, seed=cfg.seed,
                                            dtype=train_cfg.torch_dtype)
    checkpoint = train(generator, discriminator, manifest, train_cfg, out_dir,
                       data_root=cfg.data_root, resume_from=resume, show_progress=args.progress)
    print(f"checkpoint: {out_dir / 'latest.pt'} (iteration {checkpoint.iteration})")
    _report_training(out_dir, args.plot)
    return 0


def cmd_finetune(args, cfg: RunConfig) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    manifest = load_manifest(args.manifest)
    # the checkpoint's training settings are the base for flags and config files
    base = RunConfig(train=TrainConfig.from_dict(checkpoint.train_config))
    cfg = resolve_config(args, base)
    out_dir = start_run(args, cfg)

    iterations = args.iterations if args.iterations is not None else FINE_TUNE_ITERATIONS
    train_cfg = replace(cfg.train, seed=cfg.seed)
    _echo_hyperparameters(train_cfg.for_fine_tuning(iterations))
    fine_tune(checkpoint, manifest, iterations, out_dir, cfg=train_cfg,
              reinit_heads=args.reinit_heads, data_root=cfg.data_root,
              show_progress=args.progress)
    print(f"checkpoint: {out_dir / 'latest.pt'} (fine-tuned {iterations} iterations)")
    _report_training(out_dir, args.plot)
    return 0


def _load_generator(path: str):
    generator, _ = restore_models(load_checkpoint(path))
    return generator.eval()


def _input_image(path: str, size: int, dtype: torch.dtype) -> torch.Tensor:
    if not Path(path).is_file():
        raise FileNotFoundError(f"Image not found: {path}")
    return load_image(path, size).to(dtype)


def cmd_translate(args, cfg: RunConfig) -> int:
    generator = _load_generator(args.checkpoint)
    out_dir = start_run(args, cfg)
    size = generator.cfg.image_size
    dtype = next(generator.parameters()).dtype

    style_paths = args.style[:args.k] if args.k else args.style
    if not style_paths:
        raise ConfigError("At least one style image is required")
    styles = [_input_image(p, size, dtype) for p in style_paths]
    detector = build_detector(args.detector, args.fixtures, args.device) if args.variant != 'none' else None
    logger.info("Translating %d images with %d style images (variant %s)",
                len(args.content), len(styles), args.variant)

    for content_path in args.content:
        x = _input_image(content_path, size, dtype)
        with torch.no_grad():
            if args.variant == 'none':
                output = generator.translate(x, styles)
            else:
                output = VARIANTS[args.variant](x, styles, detector, generator, cfg.merge,
                                                image_id=content_path)
        target = out_dir / f"{Path(content_path).stem}_{args.variant}.png"
        save_image(output, target)
        print(f"{content_path} -> {target}")
    return 0


def _metric_models(args):
    backbone = BACKBONES[args.backbone]()
    classifier = CLASSIFIERS[args.classifier]()
    return backbone, classifier


def cmd_evaluate(args, cfg: RunConfig) -> int:
    generator = _load_generator(args.checkpoint)
    train_m = load_manifest(args.train_manifest)
    style_m = load_manifest(args.style_manifest)
    out_dir = start_run(args, cfg)

    dtype = next(generator.parameters()).dtype
    loader = ImageLoader(cfg.data_root, size=generator.cfg.image_size, dtype=dtype)
    backbone, classifier = _metric_models(args)
    backbone, classifier = backbone.to(dtype), classifier.to(dtype)
    model_id = args.model_id or Path(args.checkpoint).stem
    if args.runs < 1:
        raise ConfigError(f"--runs must be >= 1, got {args.runs}")

    for k in args.k_values or [cfg.evaluation.k_style]:
        reports = []
        for run in range(args.runs):
            protocol = replace(cfg.evaluation, k_style=k, seed=cfg.seed + run)
            reports.append(run_protocol(generator, train_m, style_m, protocol, loader, backbone,
                                        classifier, model_id=model_id, show_progress=args.progress))
        report = merge_reports(reports)
        write_report(report, out_dir / f"report_k{k}", excel=args.excel)
        print(format_report(report))
    return 0


COMMANDS = {
    'toy': cmd_toy,
    'curate': cmd_curate,
    'expand': cmd_expand,
    'train': cmd_train,
    'finetune': cmd_finetune,
    'translate': cmd_translate,
    'evaluate': cmd_evaluate,
}

USAGE_ERRORS = (FileNotFoundError, ConfigError, ManifestError)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command and map failures to exit codes (2 usage, 1 runtime)."""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except USAGE_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (FewShotError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
