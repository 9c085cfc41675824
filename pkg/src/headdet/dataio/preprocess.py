"""Resize, normalise and rescale annotations to the network input size."""

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .. import geometry
from ..exceptions import ConfigError, ShapeError

logger = logging.getLogger(__name__)

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass
class Sample:
    image: np.ndarray
    gts: np.ndarray
    source_id: str = ""
    meta: dict = field(default_factory=dict)


def resize_bilinear(image, out_h, out_w):
    """Bilinear resize with corner-aligned sampling (corner pixels map to corner pixels)."""
    image = np.asarray(image, dtype=np.float64)
    in_h, in_w = image.shape[:2]
    if in_h == 0 or in_w == 0:
        raise ShapeError("cannot resize an empty image")
    if (in_h, in_w) == (out_h, out_w):
        return image.copy()

    def coords(n_in, n_out):
        if n_out == 1 or n_in == 1:
            pos = np.zeros(n_out)
        else:
            pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
        lo = np.minimum(np.floor(pos).astype(int), n_in - 1)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, fy = coords(in_h, out_h)
    x0, x1, fx = coords(in_w, out_w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = image[y0][:, x0] * (1 - fx) + image[y0][:, x1] * fx
    bottom = image[y1][:, x0] * (1 - fx) + image[y1][:, x1] * fx
    return top * (1 - fy) + bottom * fy


def preprocess(image, gts, target_w=640, target_h=480, mean=IMAGENET_MEAN, std=IMAGENET_STD, source_id=""):
    """Resize to ``target_w x target_h``, standardise per channel, rescale boxes.

    Boxes are scaled by ``(target_w / w, target_h / h)`` and clipped; any box
    left with zero area is dropped (and logged).
    """
    if target_w % 16 or target_h % 16 or target_w <= 0 or target_h <= 0:
        raise ConfigError(f"target size {target_w}x{target_h} must be a positive multiple of 16")
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] == 0 or image.shape[1] == 0:
        raise ShapeError(f"expected a non-empty (H, W, C) image, got {image.shape}")
    h, w = image.shape[:2]
    out = resize_bilinear(image, target_h, target_w)
    out = (out - np.asarray(mean, dtype=np.float64)) / np.asarray(std, dtype=np.float64)

    boxes = geometry.as_boxes(gts).reshape(-1, 4) * np.array(
        [target_w / w, target_h / h, target_w / w, target_h / h]
    )
    boxes = geometry.clip_to_image(boxes, target_w, target_h)
    keep = geometry.area(boxes) > 0
    if not keep.all():
        logger.warning("%s: dropped %d box(es) with zero area after preprocessing",
                       source_id or "<image>", int((~keep).sum()))
    return Sample(out, boxes[keep], source_id)


def channel_stats(images) -> (np.ndarray, np.ndarray):
    """Per-channel mean and standard deviation over a collection of images."""
    total = 0
    s = 0.0
    s2 = 0.0
    for img in images:
        img = np.asarray(img, dtype=np.float64)
        flat = img.reshape(-1, img.shape[-1])
        total += len(flat)
        s = s + flat.sum(axis=0)
        s2 = s2 + (flat * flat).sum(axis=0)
    if total == 0:
        raise ValueError("no pixels to compute statistics from")
    mean = s / total
    std = np.sqrt(np.maximum(s2 / total - mean * mean, 0.0))
    return mean, np.where(std > 0, std, 1.0)


def to_samples(images, boxes, ids=None) -> List[Sample]:
    ids = ids if ids is not None else [str(i) for i in range(len(images))]
    return [Sample(np.asarray(im), geometry.as_boxes(b).reshape(-1, 4), sid)
            for im, b, sid in zip(images, boxes, ids)]
