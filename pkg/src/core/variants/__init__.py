"""
Variants Core Module

Instance-aware translation: paste-back and latent-code merging of detected
objects.
"""

from .merge import (
    VARIANTS, MergeConfig, latent_merge_code, map_box_to_latent, merge_latent_codes,
    translate_detect_merge, translate_latent_merge,
)

__all__ = [
    'VARIANTS',
    'MergeConfig',
    'latent_merge_code',
    'map_box_to_latent',
    'merge_latent_codes',
    'translate_detect_merge',
    'translate_latent_merge',
]
