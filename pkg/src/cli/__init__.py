"""
Command-Line Package

``fewshot <command>``: dataset curation and expansion, training,
fine-tuning, translation and evaluation.
"""

from .commands import main
from .parser import build_parser

__all__ = ['main', 'build_parser']
