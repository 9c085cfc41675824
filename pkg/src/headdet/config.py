"""Flat ``key = value`` run configuration shared by all CLI subcommands."""

from dataclasses import dataclass, fields, replace
from typing import Optional, Tuple

from .exceptions import ConfigError


@dataclass(frozen=True)
class RunConfig:
    # anchors
    stride: int = 16
    anchor_sizes: Tuple[float, ...] = (32.0, 64.0)
    image_w: int = 640
    image_h: int = 480
    # label assignment
    pos_iou: float = 0.7
    neg_iou: float = 0.3
    batch_size: int = 32
    pos_fraction: float = 0.5
    # network
    channels: Tuple[int, ...] = (8, 16, 32, 64)
    conv6_channels: int = 64
    init_sigma: float = 0.01
    backbone_init: str = "he"
    normalize: str = "dataset"
    # training
    lr: float = 0.001
    lr_decay: float = 0.1
    decay_after_epochs: int = 8
    epochs: int = 15
    weight_decay: float = 0.0005
    # inference and evaluation
    nms_iou: float = 0.3
    score_threshold: float = 0.5
    max_detections: int = 300
    eval_iou: float = 0.5
    # synthetic data
    synth_n: int = 100
    synth_count_min: int = 1
    synth_count_max: int = 5
    synth_size_min: int = 16
    synth_size_max: int = 48
    synth_noise: float = 0.05
    synth_max_overlap: float = 0.3
    # paths
    train_annotations: Optional[str] = None
    test_annotations: Optional[str] = None
    image_root: Optional[str] = None
    checkpoint: Optional[str] = None
    out_dir: str = "."
    rng_seed: int = 0


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(name, raw):
    """Convert a string value to the declared type of field ``name``."""
    ftype = _FIELDS[name].type
    raw = raw.strip()
    if ftype in (int, "int"):
        return int(raw)
    if ftype in (float, "float"):
        return float(raw)
    if ftype in (str, "str"):
        return raw
    if "Optional" in str(ftype):
        return raw or None
    if "Tuple[int" in str(ftype):
        return tuple(int(v) for v in raw.split(",") if v.strip())
    if "Tuple[float" in str(ftype):
        return tuple(float(v) for v in raw.split(",") if v.strip())
    raise ConfigError(f"unsupported type for {name}")


def field_names():
    return list(_FIELDS)


def convert_value(name, raw, line=None):
    if name not in _FIELDS:
        raise ConfigError(f"unknown key {name!r}", line)
    try:
        return _convert(name, raw)
    except ValueError:
        raise ConfigError(f"invalid value {raw.strip()!r} for {name}", line) from None


def parse_config(data, base: RunConfig = None) -> RunConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) over ``base`` defaults."""
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    values = {}
    for lineno, line in enumerate(data.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        values[key] = convert_value(key, raw, lineno)
    return replace(base or RunConfig(), **values)


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Override fields with already-typed values; ``None`` entries are skipped."""
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
