"""Multitask speech-data filtering toolkit.

Learns five per-clip labels (multispeaker, music, foreign, noise,
synthetic) on top of frozen-encoder feature stacks and uses them to
filter dataset manifests.  See the README for the CLI and file formats.
"""

from .backend import backend_name, compiled_available
from .labels import CLASS_NAMES, LabelVector
from .model import ModelConfig, Whilter, bce_loss, load_checkpoint, save_checkpoint

__version__ = "0.1.0"

__all__ = [
    "CLASS_NAMES",
    "LabelVector",
    "ModelConfig",
    "Whilter",
    "bce_loss",
    "backend_name",
    "compiled_available",
    "load_checkpoint",
    "save_checkpoint",
    "__version__",
]
