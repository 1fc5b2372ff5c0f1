"""Classifier architectures, inference helpers and checkpoint persistence."""

from .checkpoint import FORMAT_VERSION, load_checkpoint, read_manifest, save_checkpoint
from .network import (
    Network,
    build_convnet,
    build_from_architecture,
    build_mlp,
    classify,
    predict_proba,
)

__all__ = [
    "FORMAT_VERSION",
    "Network",
    "build_convnet",
    "build_from_architecture",
    "build_mlp",
    "classify",
    "load_checkpoint",
    "predict_proba",
    "read_manifest",
    "save_checkpoint",
]
