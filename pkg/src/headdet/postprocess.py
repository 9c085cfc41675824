"""Decode head outputs into scored boxes and filter them with greedy NMS."""

from dataclasses import dataclass

import numpy as np

from . import geometry
from .anchors import AnchorGrid
from .exceptions import ConfigError, ShapeError


@dataclass(frozen=True)
class PostprocessConfig:
    nms_iou: float = 0.3
    score_threshold: float = 0.5
    max_detections: int = 300

    def __post_init__(self):
        if not (0 <= self.nms_iou <= 1 and 0 <= self.score_threshold <= 1):
            raise ConfigError("thresholds must lie in [0, 1]")
        if self.max_detections < 0:
            raise ConfigError("max_detections must be non-negative")


@dataclass
class Detections:
    """Scored boxes; ``index`` is the source anchor, used to break score ties.

    Attributes:
        boxes: (n, 4)
        scores: (n,) head probability
        index: (n,) int
    """

    boxes: np.ndarray
    scores: np.ndarray
    index: np.ndarray

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 4)), np.zeros(0), np.zeros(0, dtype=np.int64))

    @classmethod
    def from_arrays(cls, boxes, scores):
        boxes = geometry.as_boxes(boxes).reshape(-1, 4)
        scores = np.asarray(scores, dtype=np.float64).reshape(-1)
        if len(boxes) != len(scores):
            raise ShapeError("boxes and scores differ in length")
        return cls(boxes, scores, np.arange(len(scores)))

    def __len__(self):
        return len(self.scores)

    def take(self, idx):
        return Detections(self.boxes[idx], self.scores[idx], self.index[idx])


def head_probability(cls_out):
    """Softmax probability of the "head" class (channel 1 of each anchor pair)."""
    logits = np.asarray(cls_out, dtype=np.float64).reshape(-1, 2)
    # p1 = 1 / (1 + exp(l0 - l1)), computed stably
    diff = logits[:, 0] - logits[:, 1]
    return np.exp(-np.logaddexp(0.0, diff))


def decode_predictions(grid: AnchorGrid, reg_out, cls_out) -> Detections:
    """One detection per anchor: decoded, image-clipped box and head score."""
    n = len(grid)
    reg_out = np.asarray(reg_out)
    cls_out = np.asarray(cls_out)
    cfg = grid.config
    if reg_out.shape != (cfg.feat_h, cfg.feat_w, 4 * cfg.n_anchors) or cls_out.shape != (
        cfg.feat_h, cfg.feat_w, 2 * cfg.n_anchors
    ):
        raise ShapeError(
            f"head outputs {reg_out.shape}/{cls_out.shape} do not match a "
            f"{cfg.feat_h}x{cfg.feat_w}x{cfg.n_anchors} anchor grid"
        )
    deltas = reg_out.reshape(n, 4).astype(np.float64)
    boxes = geometry.clip_to_image(geometry.decode(grid.boxes, deltas), cfg.image_w, cfg.image_h)
    return Detections(boxes, head_probability(cls_out), np.arange(n))


def _order(dets: Detections):
    # descending score, then ascending anchor index
    return np.lexsort((dets.index, -dets.scores))


def nms(dets: Detections, iou_threshold=0.3) -> Detections:
    """Greedy non-maximum suppression.

    A detection is dropped when its IoU with an already kept, higher-ranked
    detection is strictly greater than ``iou_threshold``.
    """
    if len(dets) == 0:
        return dets
    order = _order(dets)
    boxes = dets.boxes[order]
    x1, y1, x2, y2 = boxes.T
    areas = geometry.area(boxes)
    suppressed = np.zeros(len(order), dtype=bool)
    keep = []
    for i in range(len(order)):
        if suppressed[i]:
            continue
        keep.append(i)
        rest = np.arange(i + 1, len(order))
        rest = rest[~suppressed[rest]]
        if len(rest) == 0:
            break
        w = np.clip(np.minimum(x2[i], x2[rest]) - np.maximum(x1[i], x1[rest]), 0, None)
        h = np.clip(np.minimum(y2[i], y2[rest]) - np.maximum(y1[i], y1[rest]), 0, None)
        inter = w * h
        union = areas[i] + areas[rest] - inter
        ov = np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)
        suppressed[rest[ov > iou_threshold]] = True
    return dets.take(order[keep])


def filter_detections(dets: Detections, cfg: PostprocessConfig) -> Detections:
    """Strict score filter, drop zero-area boxes, NMS, then cap the count."""
    keep = (dets.scores > cfg.score_threshold) & (geometry.area(dets.boxes) > 0)
    kept = nms(dets.take(np.flatnonzero(keep)), cfg.nms_iou)
    return kept.take(np.arange(min(len(kept), cfg.max_detections)))


def detect(params, image, grid: AnchorGrid, cfg: PostprocessConfig = None) -> Detections:
    """Forward pass followed by decoding, score filtering and NMS."""
    from .net import forward

    cfg = cfg or PostprocessConfig()
    reg, cls, _ = forward(params, image)
    return filter_detections(decode_predictions(grid, reg, cls), cfg)
