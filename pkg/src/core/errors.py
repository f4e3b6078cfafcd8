"""
Error Types

Exception hierarchy shared by curation, training, translation and evaluation.
"""


class FewShotError(Exception):
    """Base class for every error raised by this package."""


class ManifestError(FewShotError, ValueError):
    """Malformed, empty or inconsistent dataset manifest."""


class ConfigError(FewShotError, ValueError):
    """Configuration value outside its allowed range."""


class DetectorError(FewShotError, RuntimeError):
    """Object detector unavailable or failing on an image."""


class TrainingDivergedError(FewShotError, RuntimeError):
    """A loss term became non-finite."""


class CheckpointMismatchError(FewShotError, ValueError):
    """Checkpoint incompatible with the requested configuration."""
