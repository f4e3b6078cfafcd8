"""
Evaluation Core Module

Perceptual distance (LPIPS), Inception Score, the translation protocol and
metric reports.
"""

from .lpips import BACKBONES, RandomConvBackbone, TorchvisionVGGBackbone, lpips
from .inception import CLASSIFIERS, RandomConvClassifier, TorchvisionInceptionClassifier, inception_score
from .protocol import EvalProtocol, run_protocol
from .report import MetricReport, MetricRow, merge_reports, read_report, write_report

__all__ = [
    'BACKBONES',
    'CLASSIFIERS',
    'RandomConvBackbone',
    'TorchvisionVGGBackbone',
    'lpips',
    'RandomConvClassifier',
    'TorchvisionInceptionClassifier',
    'inception_score',
    'EvalProtocol',
    'run_protocol',
    'MetricReport',
    'MetricRow',
    'merge_reports',
    'read_report',
    'write_report',
]
