from .annotations import format_record, parse_annotations, serialize_annotations
from .netpbm import encode_pgm, encode_ppm, load_image
from .preprocess import (
    IMAGENET_MEAN,
    IMAGENET_STD,
    Sample,
    channel_stats,
    preprocess,
    resize_bilinear,
)
from .synth import SynthConfig, synth_generate, write_dataset

__all__ = [
    "IMAGENET_MEAN",
    "IMAGENET_STD",
    "Sample",
    "SynthConfig",
    "channel_stats",
    "encode_pgm",
    "encode_ppm",
    "format_record",
    "load_image",
    "parse_annotations",
    "preprocess",
    "resize_bilinear",
    "serialize_annotations",
    "synth_generate",
    "write_dataset",
]
