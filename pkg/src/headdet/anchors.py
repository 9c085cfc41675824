"""Anchor grid generation, training label assignment and minibatch sampling."""

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import geometry
from .exceptions import ConfigError, EmptySampleError

POSITIVE = 1
NEGATIVE = 0
IGNORE = -1


@dataclass(frozen=True)
class AnchorConfig:
    stride: int = 16
    sizes: Sequence[float] = (32, 64)
    image_w: int = 640
    image_h: int = 480

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(float(s) for s in self.sizes))
        if self.stride < 1:
            raise ConfigError("stride must be positive")
        if len(self.sizes) < 1 or min(self.sizes) <= 0:
            raise ConfigError("at least one positive anchor size is required")
        if self.image_w % self.stride or self.image_h % self.stride:
            raise ConfigError(
                f"image size {self.image_w}x{self.image_h} is not a multiple of stride {self.stride}"
            )

    @property
    def feat_w(self):
        return self.image_w // self.stride

    @property
    def feat_h(self):
        return self.image_h // self.stride

    @property
    def n_anchors(self):
        return len(self.sizes)


@dataclass(frozen=True)
class AnchorGrid:
    """Anchors ordered row-major over feature cells, then by size index.

    Anchor ``(i * feat_w + j) * N + k`` is the square of ``sizes[k]`` centred on
    feature cell ``(i, j)``; this is the same order as reshaping a
    ``(feat_h, feat_w, N * 4)`` head output to ``(-1, 4)``.
    """

    boxes: np.ndarray
    config: AnchorConfig

    def __len__(self):
        return len(self.boxes)


@dataclass(frozen=True)
class AssignmentConfig:
    pos_iou: float = 0.7
    neg_iou: float = 0.3
    batch_size: int = 32
    pos_fraction: float = 0.5

    def __post_init__(self):
        if not 0 <= self.neg_iou < self.pos_iou <= 1:
            raise ConfigError("require 0 <= neg_iou < pos_iou <= 1")
        if self.batch_size < 1 or not 0 <= self.pos_fraction <= 1:
            raise ConfigError("invalid batch_size or pos_fraction")
        if self.pos_fraction == 0.5 and self.batch_size % 2:
            raise ConfigError("batch_size must be even for a 1:1 sample")


@dataclass
class LabeledAnchorSet:
    """Per-anchor training labels.

    Attributes:
        labels: (A,) int8 in {1 positive, 0 negative, -1 ignore}
        matched_gt: (A,) int, index of the matched gt for positives, -1 otherwise
        targets: (A, 4) regression targets, valid only where ``labels == 1``
        sample_mask: (A,) bool, anchors selected for the loss
    """

    labels: np.ndarray
    matched_gt: np.ndarray
    targets: np.ndarray
    sample_mask: np.ndarray

    @property
    def positive(self):
        return self.labels == POSITIVE

    @property
    def negative(self):
        return self.labels == NEGATIVE


def generate_anchor_grid(cfg: AnchorConfig) -> AnchorGrid:
    ys = (np.arange(cfg.feat_h) + 0.5) * cfg.stride
    xs = (np.arange(cfg.feat_w) + 0.5) * cfg.stride
    cy, cx = np.meshgrid(ys, xs, indexing="ij")
    half = np.asarray(cfg.sizes) / 2.0
    cx = cx[:, :, None]
    cy = cy[:, :, None]
    boxes = np.stack(
        np.broadcast_arrays(cx - half, cy - half, cx + half, cy + half), axis=-1
    ).reshape(-1, 4)
    return AnchorGrid(boxes, cfg)


def assign_labels(grid: AnchorGrid, gts, cfg: Optional[AssignmentConfig] = None) -> LabeledAnchorSet:
    """Label anchors against ground-truth boxes.

    Anchors crossing the image border are ignored. Among in-image anchors:

    * IoU >= ``pos_iou`` with any gt is positive;
    * for each gt, the in-image anchor(s) with the highest IoU (if > 0) are
      positive, even below ``pos_iou`` and even below ``neg_iou``;
    * otherwise max IoU <= ``neg_iou`` is negative, the rest ignored.

    A positive regresses towards its highest-IoU gt (lowest index on ties).
    """
    cfg = cfg or AssignmentConfig()
    anchors = grid.boxes
    n = len(anchors)
    gts = geometry.as_boxes(gts).reshape(-1, 4)
    cfg_a = grid.config
    inside = geometry.inside_image(anchors, cfg_a.image_w, cfg_a.image_h)

    labels = np.full(n, IGNORE, dtype=np.int8)
    matched = np.full(n, -1, dtype=np.int64)
    targets = np.zeros((n, 4), dtype=np.float64)
    if len(gts) == 0:
        labels[inside] = NEGATIVE
        return LabeledAnchorSet(labels, matched, targets, np.zeros(n, dtype=bool))

    ious = geometry.iou_matrix(anchors, gts)
    ious[~inside] = -1.0
    best_gt = ious.argmax(axis=1)
    best_iou = ious[np.arange(n), best_gt]

    labels[inside & (best_iou <= cfg.neg_iou)] = NEGATIVE
    labels[inside & (best_iou >= cfg.pos_iou)] = POSITIVE
    if inside.any():
        gt_best = ious[inside].max(axis=0)
        tied = (ious == gt_best[None, :]) & (gt_best[None, :] > 0) & inside[:, None]
        labels[tied.any(axis=1)] = POSITIVE

    pos = labels == POSITIVE
    matched[pos] = best_gt[pos]
    if pos.any():
        targets[pos] = geometry.encode(anchors[pos], gts[best_gt[pos]])
    return LabeledAnchorSet(labels, matched, targets, np.zeros(n, dtype=bool))


def sample_minibatch(labeled: LabeledAnchorSet, cfg: Optional[AssignmentConfig] = None, rng_seed=0):
    """Select up to ``batch_size * pos_fraction`` positives, pad with negatives.

    ``rng_seed`` may be an int or a ``numpy.random.Generator``.

    Raises:
        EmptySampleError: no positive and no negative anchors available.
    """
    cfg = cfg or AssignmentConfig()
    rng = np.random.default_rng(rng_seed)
    pos_idx = np.flatnonzero(labeled.labels == POSITIVE)
    neg_idx = np.flatnonzero(labeled.labels == NEGATIVE)
    if len(pos_idx) == 0 and len(neg_idx) == 0:
        raise EmptySampleError("no labeled anchors to sample from")
    n_pos = min(len(pos_idx), int(cfg.batch_size * cfg.pos_fraction))
    n_neg = min(len(neg_idx), cfg.batch_size - n_pos)
    mask = np.zeros(len(labeled.labels), dtype=bool)
    mask[rng.choice(pos_idx, n_pos, replace=False)] = True
    mask[rng.choice(neg_idx, n_neg, replace=False)] = True
    return replace(labeled, sample_mask=mask)
