"""Synthetic "head" scenes: bright filled ellipses on a noisy dark background."""

import os
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .. import geometry
from ..exceptions import ConfigError, PlacementError
from .annotations import serialize_annotations
from .netpbm import encode_ppm
from .preprocess import Sample


@dataclass(frozen=True)
class SynthConfig:
    image_w: int = 128
    image_h: int = 128
    head_count: Tuple[int, int] = (1, 5)
    head_size: Tuple[int, int] = (16, 48)
    noise: float = 0.05
    max_overlap: float = 0.3
    rng_seed: int = 0
    max_retries: int = 200

    def __post_init__(self):
        lo, hi = self.head_count
        smin, smax = self.head_size
        if lo < 0 or hi < lo:
            raise ConfigError(f"invalid head_count range {self.head_count}")
        if smin < 2 or smax < smin:
            raise ConfigError(f"invalid head_size range {self.head_size}")
        if smax > min(self.image_w, self.image_h):
            raise ConfigError("head_size does not fit in the image")
        if self.noise < 0:
            raise ConfigError("noise must be non-negative")


def render_ellipse_mask(box, width, height):
    """Pixels whose centres lie inside the ellipse inscribed in ``box``."""
    x1, y1, x2, y2 = box
    cx, cy = (x1 + x2) / 2, (y1 + y2) / 2
    ax, ay = (x2 - x1) / 2, (y2 - y1) / 2
    ys = np.arange(height)[:, None] + 0.5
    xs = np.arange(width)[None, :] + 0.5
    return ((xs - cx) / ax) ** 2 + ((ys - cy) / ay) ** 2 <= 1.0


def mask_extent(mask):
    """Bounding box of the set pixels, in continuous corner coordinates."""
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        return np.zeros(4)
    return np.array([xs.min(), ys.min(), xs.max() + 1, ys.max() + 1], dtype=np.float64)


def _place_boxes(rng, cfg: SynthConfig, k):
    smin, smax = cfg.head_size
    boxes = []
    for _ in range(k):
        for _attempt in range(cfg.max_retries):
            w = int(rng.integers(smin, smax + 1))
            h = int(np.clip(round(w * rng.uniform(0.85, 1.15)), smin, smax))
            x1 = int(rng.integers(0, cfg.image_w - w + 1))
            y1 = int(rng.integers(0, cfg.image_h - h + 1))
            box = np.array([x1, y1, x1 + w, y1 + h], dtype=np.float64)
            if not boxes or geometry.iou_matrix(box[None], np.array(boxes)).max() <= cfg.max_overlap:
                boxes.append(box)
                break
        else:
            return None
    return np.array(boxes, dtype=np.float64).reshape(-1, 4)


def synth_image(rng, cfg: SynthConfig):
    """Draw one scene. Returns ``(image, boxes)`` with image in [0, 1]."""
    lo, hi = cfg.head_count
    k = int(rng.integers(lo, hi + 1))
    boxes = None
    for _ in range(10):
        boxes = _place_boxes(rng, cfg, k)
        if boxes is not None:
            break
    if boxes is None:
        raise PlacementError(f"could not place {k} heads without overlap above {cfg.max_overlap}")

    base = rng.uniform(0.0, 0.25, size=3)
    img = np.broadcast_to(base, (cfg.image_h, cfg.image_w, 3)).copy()
    # occluding heads are painted in placement order
    for box in boxes:
        mask = render_ellipse_mask(box, cfg.image_w, cfg.image_h)
        color = rng.uniform(0.6, 1.0, size=3)
        img[mask] = color
        if geometry.iou(mask_extent(mask), box) < 0.9:
            raise AssertionError(f"rendered extent does not match gt box {box}")
    img += rng.normal(0.0, cfg.noise, size=img.shape)
    return np.clip(img, 0.0, 1.0), boxes


def synth_generate(cfg: SynthConfig, n) -> List[Sample]:
    """Generate ``n`` samples deterministically from ``cfg.rng_seed``."""
    rng = np.random.default_rng(cfg.rng_seed)
    samples = []
    for i in range(n):
        img, boxes = synth_image(rng, cfg)
        samples.append(Sample(img, boxes, f"synth_{i:05d}.ppm"))
    return samples


def write_dataset(samples, out_dir, annotation_name="annotations.txt"):
    """Write images as PPM under ``out_dir/images`` plus an annotation list.

    Images are quantised to 8 bits, so reloading gives values within 1/510 of
    the generated ones. Returns the annotation file path.
    """
    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    records = []
    for s in samples:
        rel = os.path.join("images", s.source_id)
        with open(os.path.join(out_dir, rel), "wb") as fh:
            fh.write(encode_ppm(s.image))
        records.append((rel, s.gts))
    path = os.path.join(out_dir, annotation_name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_annotations(records))
    return path
