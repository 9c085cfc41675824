"""
Box geometry
============

Boxes are ``(x1, y1, x2, y2)`` in continuous pixel coordinates (x right,
y down), with no "+1" pixel convention. Every function accepts a single box of
shape ``(4,)`` or a stack of shape ``(..., 4)``.

Deltas follow the R-CNN parameterization on center/size coordinates::

    tx = (x - xa) / wa      ty = (y - ya) / ha
    tw = log(w / wa)        th = log(h / ha)
"""

import numpy as np

from .exceptions import InvalidBoxError, InvalidDeltaError


def as_boxes(boxes):
    boxes = np.asarray(boxes, dtype=np.float64)
    if boxes.shape[-1:] != (4,):
        raise ValueError(f"boxes must have trailing dimension 4, got shape {boxes.shape}")
    return boxes


def area(boxes):
    """Area of each box, 0 for degenerate boxes.

    Args:
        boxes: (..., 4) boxes in (x1, y1, x2, y2) format

    Returns:
        (...,) areas; a Python-float-compatible scalar for a single box
    """
    b = as_boxes(boxes)
    w = np.clip(b[..., 2] - b[..., 0], 0.0, None)
    h = np.clip(b[..., 3] - b[..., 1], 0.0, None)
    return w * h


def iou_matrix(boxes_a, boxes_b):
    """Pairwise IoU between two box sets.

    Args:
        boxes_a: (N, 4)
        boxes_b: (M, 4)

    Returns:
        (N, M) matrix; entries with zero union are 0.
    """
    a = as_boxes(boxes_a).reshape(-1, 4)
    b = as_boxes(boxes_b).reshape(-1, 4)
    ix1 = np.maximum(a[:, None, 0], b[None, :, 0])
    iy1 = np.maximum(a[:, None, 1], b[None, :, 1])
    ix2 = np.minimum(a[:, None, 2], b[None, :, 2])
    iy2 = np.minimum(a[:, None, 3], b[None, :, 3])
    inter = np.clip(ix2 - ix1, 0.0, None) * np.clip(iy2 - iy1, 0.0, None)
    union = area(a)[:, None] + area(b)[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def iou(box_a, box_b):
    """IoU of two single boxes."""
    return float(iou_matrix(np.reshape(box_a, (1, 4)), np.reshape(box_b, (1, 4)))[0, 0])


def _center_size(boxes):
    w = boxes[..., 2] - boxes[..., 0]
    h = boxes[..., 3] - boxes[..., 1]
    return boxes[..., 0] + 0.5 * w, boxes[..., 1] + 0.5 * h, w, h


def _check_positive(boxes, what):
    w = boxes[..., 2] - boxes[..., 0]
    h = boxes[..., 3] - boxes[..., 1]
    if not (np.all(w > 0) and np.all(h > 0)):
        raise InvalidBoxError(f"{what} boxes must have positive width and height")


def encode(anchors, gts):
    """Encode ground-truth boxes as deltas relative to anchors.

    Args:
        anchors: (..., 4) reference boxes
        gts: (..., 4) target boxes, broadcastable against ``anchors``

    Returns:
        (..., 4) deltas ``(tx, ty, tw, th)``

    Raises:
        InvalidBoxError: if any anchor or target has non-positive size.
    """
    anchors = as_boxes(anchors)
    gts = as_boxes(gts)
    _check_positive(anchors, "anchor")
    _check_positive(gts, "ground-truth")
    ax, ay, aw, ah = _center_size(anchors)
    gx, gy, gw, gh = _center_size(gts)
    return np.stack(
        [(gx - ax) / aw, (gy - ay) / ah, np.log(gw / aw), np.log(gh / ah)], axis=-1
    )


def decode(anchors, deltas):
    """Inverse of :func:`encode`: apply deltas to anchors.

    Raises:
        InvalidBoxError: degenerate anchor.
        InvalidDeltaError: non-finite delta.
    """
    anchors = as_boxes(anchors)
    deltas = np.asarray(deltas, dtype=np.float64)
    _check_positive(anchors, "anchor")
    if not np.all(np.isfinite(deltas)):
        raise InvalidDeltaError("deltas must be finite")
    ax, ay, aw, ah = _center_size(anchors)
    cx = ax + deltas[..., 0] * aw
    cy = ay + deltas[..., 1] * ah
    w = aw * np.exp(deltas[..., 2])
    h = ah * np.exp(deltas[..., 3])
    return np.stack([cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h], axis=-1)


def clip_to_image(boxes, width, height):
    """Clamp box coordinates into ``[0, width] x [0, height]``."""
    b = as_boxes(boxes).copy()
    b[..., 0::2] = np.clip(b[..., 0::2], 0.0, width)
    b[..., 1::2] = np.clip(b[..., 1::2], 0.0, height)
    return b


def inside_image(boxes, width, height):
    """True where the box lies within the image; touching the border counts as inside."""
    b = as_boxes(boxes)
    return (b[..., 0] >= 0) & (b[..., 1] >= 0) & (b[..., 2] <= width) & (b[..., 3] <= height)
