"""Sketch cleanup toolkit.

Synthesizes rough/clean sketch pairs, trains a fully convolutional cleaner
with a density-weighted class-balanced loss, scores image quality, and
measures the retrieval payoff of cleaning queries. See the README for the
CLI and the HTTP service.
"""

from .losses import LossConfig
from .model import NetConfig, Network, build_network, load_checkpoint, save_checkpoint
from .raster import invert, load_raster, resize_bilinear, save_raster, to_ink_mask
from .retrieval import RetrievalIndex, ab_compare, build_index, embed, query
from .synth import DefectProfile, ShapeSpec, TrainingPair, inject_defects, make_dataset, render_clean
from .training import TrainConfig, evaluate, split_dataset, train

__version__ = "0.1.0"

__all__ = [
    "LossConfig",
    "NetConfig",
    "Network",
    "build_network",
    "load_checkpoint",
    "save_checkpoint",
    "invert",
    "load_raster",
    "resize_bilinear",
    "save_raster",
    "to_ink_mask",
    "RetrievalIndex",
    "ab_compare",
    "build_index",
    "embed",
    "query",
    "DefectProfile",
    "ShapeSpec",
    "TrainingPair",
    "inject_defects",
    "make_dataset",
    "render_clean",
    "TrainConfig",
    "evaluate",
    "split_dataset",
    "train",
]
