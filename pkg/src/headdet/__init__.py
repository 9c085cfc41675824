"""Anchor-based single-stage head detection, written from scratch in numpy."""

from .anchors import AnchorConfig, AssignmentConfig, assign_labels, generate_anchor_grid, sample_minibatch
from .estimator import ChannelStandardizer, HeadDetector
from .net import NetConfig, TrainConfig
from .postprocess import Detections, PostprocessConfig, detect, nms

__version__ = "0.1.0"

__all__ = [
    "AnchorConfig",
    "AssignmentConfig",
    "ChannelStandardizer",
    "Detections",
    "HeadDetector",
    "NetConfig",
    "PostprocessConfig",
    "TrainConfig",
    "assign_labels",
    "detect",
    "generate_anchor_grid",
    "nms",
    "sample_minibatch",
]
