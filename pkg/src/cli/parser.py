"""
Argument Parser

One subcommand per pipeline step: toy, curate, expand, train, finetune,
translate and evaluate.
"""

import argparse

from ..core.config import PHASE_PRESETS
from ..core.evaluation import BACKBONES, CLASSIFIERS

VARIANT_CHOICES = ('none', 'paste', 'latent')


def _common(parser: argparse.ArgumentParser):
    parser.add_argument('--config', help="Flat config file (section.key = value)")
    parser.add_argument('--preset', choices=sorted(PHASE_PRESETS), help="Experiment phase preset")
    parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help="Override one config value, e.g. train.batch_size=2 (repeatable)")
    parser.add_argument('--seed', type=int, help="Global seed")
    parser.add_argument('--data-root', help="Directory manifest paths are relative to "
                                            "(default: $FEWSHOT_DATA_ROOT or .)")
    parser.add_argument('--out-dir', help="Output directory")
    parser.add_argument('-v', '--verbose', action='store_true', help="Debug logging")
    parser.add_argument('--progress', action='store_true', help="Show progress bars")


def _detector_options(parser: argparse.ArgumentParser):
    parser.add_argument('--detector', choices=('stub', 'retinanet'), default='stub')
    parser.add_argument('--fixtures', help="JSON file of stub detections keyed by image path")
    parser.add_argument('--device', default='cpu')


def _train_options(parser: argparse.ArgumentParser):
    parser.add_argument('--batch-size', type=int)
    parser.add_argument('--k', type=int, dest='k_shot', help="Style images per training sample")
    parser.add_argument('--lambda-r', type=float)
    parser.add_argument('--lambda-f', type=float)
    parser.add_argument('--gan-mode', choices=('nonsaturating', 'saturating'))
    parser.add_argument('--checkpoint-interval', type=int)
    parser.add_argument('--log-interval', type=int)
    parser.add_argument('--dtype', choices=('float32', 'float64'))
    parser.add_argument('--plot', action='store_true', help="Write a loss curve PNG")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='fewshot',
        description="Few-shot street-scene image translation: curation, training, "
                    "instance-aware translation and evaluation.",
    )
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('toy', help="Write a toy dataset of tinted shapes")
    _common(p)
    p.add_argument('--classes', default='red,blue', help="Comma-separated toy classes")
    p.add_argument('--n-per-class', type=int, default=32)
    p.add_argument('--size', type=int, default=32)

    p = sub.add_parser('curate', help="Split and balance a manifest")
    _common(p)
    p.add_argument('--manifest', required=True)
    p.add_argument('--test-classes', help="Comma-separated held-out classes")
    p.add_argument('--test-domains', help="Comma-separated held-out domains (all their classes)")
    p.add_argument('--balance', type=int, help="Keep at most N images per class")
    p.add_argument('--keep-list', help="Keep only the classes listed in this file")

    p = sub.add_parser('expand', help="Create object classes from detections")
    _common(p)
    _detector_options(p)
    p.add_argument('--manifest', required=True)
    p.add_argument('--threshold', type=float, help="Keep detections strictly above this confidence")
    p.add_argument('--min-box-side', type=int)
    p.add_argument('--include-whole-images', action='store_true', default=None)
    p.add_argument('--skip-failed', action='store_true', default=None,
                   help="Log and skip images the detector fails on")
    p.add_argument('--keep-list', help="Keep only the classes listed in this file")
    p.add_argument('--crop-dir', help="Crop directory (default: <out-dir>/crops)")

    p = sub.add_parser('train', help="Train generator and discriminator")
    _common(p)
    _train_options(p)
    p.add_argument('--manifest', required=True, help="Training manifest")
    p.add_argument('--iterations', type=int)
    p.add_argument('--lr', type=float)
    p.add_argument('--image-size', type=int)
    p.add_argument('--resume', help="Checkpoint to continue from")

    p = sub.add_parser('finetune', help="Fine-tune a checkpoint with a ten times smaller learning rate")
    _common(p)
    _train_options(p)
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--manifest', required=True)
    p.add_argument('--iterations', type=int, help="Fine-tuning steps (default 250000)")
    p.add_argument('--reinit-heads', action='store_true',
                   help="New discriminator head for the manifest classes")

    p = sub.add_parser('translate', help="Translate content images")
    _common(p)
    _detector_options(p)
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--content', action='append', required=True, help="Content image (repeatable)")
    p.add_argument('--style', action='append', required=True, help="Style image (repeatable)")
    p.add_argument('--k', type=int, help="Use only the first K style images")
    p.add_argument('--variant', choices=VARIANT_CHOICES, default='none')
    p.add_argument('--feather', type=int, help="Feather width of pasted objects in pixels")
    p.add_argument('--max-objects', type=int)

    p = sub.add_parser('evaluate', help="LPIPS / Inception Score protocol")
    _common(p)
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--train-manifest', required=True, help="Source-class images")
    p.add_argument('--style-manifest', required=True, help="Images of the target class")
    p.add_argument('--target', help="Target class (default night)")
    p.add_argument('--k', type=int, action='append', dest='k_values',
                   help="Style images per translation (repeatable, default 2)")
    p.add_argument('--n-content', type=int)
    p.add_argument('--n-pairs', type=int)
    p.add_argument('--runs', type=int, default=1, help="Repeat with seeds seed..seed+runs-1 and average")
    p.add_argument('--backbone', choices=sorted(BACKBONES), default='random')
    p.add_argument('--classifier', choices=sorted(CLASSIFIERS), default='random')
    p.add_argument('--model-id', help="Model name in the report (default: checkpoint stem)")
    p.add_argument('--excel', action='store_true', help="Also write .xlsx reports")

    return parser
