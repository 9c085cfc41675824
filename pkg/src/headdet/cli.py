"""Command line entry point: ``headdet <subcommand> [options]``.

Subcommands: ``design-anchors``, ``make-synth``, ``train``, ``detect``, ``eval``.
Every option of :class:`headdet.config.RunConfig` is also a flag
(``anchor_sizes`` -> ``--anchor-sizes``); flags override ``--config`` file
values, which override defaults.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import receptive_field as rfmod
from .config import RunConfig, apply_overrides, convert_value, field_names, parse_config
from .dataio import (
    SynthConfig,
    format_record,
    load_image,
    parse_annotations,
    preprocess,
    synth_generate,
    write_dataset,
)
from .evaluation import MatchResult, match_detections, pr_curve
from .exceptions import ConfigError, HeadDetError
from .training import LOG_HEADER, format_log_row

logger = logging.getLogger("headdet")


def _add_run_flags(p):
    p.add_argument("--config", help="key = value configuration file")
    for name in field_names():
        p.add_argument("--" + name.replace("_", "-"), dest="cfg_" + name, metavar="VALUE")


def _run_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        with open(args.config, "rb") as fh:
            cfg = parse_config(fh.read(), cfg)
    overrides = {}
    for name in field_names():
        raw = getattr(args, "cfg_" + name)
        if raw is not None:
            overrides[name] = convert_value(name, raw)
    return apply_overrides(cfg, overrides)


def build_parser():
    parser = argparse.ArgumentParser(prog="headdet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design-anchors", help="recommend anchor sizes from the receptive field")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--rf", type=int, help="theoretical receptive field in pixels")
    src.add_argument("--stack", choices=["vgg16", "tinynet"], default=None,
                     help="compute the receptive field of a known layer stack")
    p.add_argument("--stride", type=int, default=16)
    p.add_argument("--shrink", type=float, default=3.5)
    p.add_argument("--n", type=int, default=2, help="number of scales")
    p.add_argument("--aspect-ratio", type=float, default=1.0)

    for name, help_ in [
        ("make-synth", "generate a synthetic dataset"),
        ("train", "train a detector"),
        ("detect", "run a trained detector over an image list"),
        ("eval", "compute AP and the precision/recall curve"),
    ]:
        p = sub.add_parser(name, help=help_)
        _add_run_flags(p)
        if name == "detect":
            p.add_argument("--images", help="annotation-format image list (defaults to test_annotations)")
        if name == "eval":
            p.add_argument("--detections", help="detection file; otherwise the checkpoint is run")
    return parser


# -- subcommands


def cmd_design_anchors(args):
    if args.rf is not None:
        state = rfmod.RFState(args.rf, args.stride)
    else:
        stack = rfmod.VGG16_CONV5 if args.stack in (None, "vgg16") else rfmod.TINYNET_STACK
        state = rfmod.rf_of_stack(stack)
    design = rfmod.design_anchor_scales(state, args.shrink, args.n, args.aspect_ratio)
    print(rfmod.format_design(design, state))
    print("sizes: " + ", ".join(f"{s:g}" for s in design.sizes))
    print("scales: " + ", ".join(str(s) for s in design.scales))
    return 0


def cmd_make_synth(cfg: RunConfig):
    scfg = SynthConfig(
        cfg.image_w, cfg.image_h, (cfg.synth_count_min, cfg.synth_count_max),
        (cfg.synth_size_min, cfg.synth_size_max), cfg.synth_noise, cfg.synth_max_overlap, cfg.rng_seed,
    )
    samples = synth_generate(scfg, cfg.synth_n)
    path = write_dataset(samples, cfg.out_dir)
    print(f"wrote {len(samples)} images and {path}")
    return 0


def _resolve(cfg, path):
    root = cfg.image_root
    if root is None:
        return path
    return os.path.join(root, path)


def load_dataset(cfg: RunConfig, annotation_path):
    """Load and resize images listed in an annotation file.

    Returns (images, boxes, paths, original sizes); boxes are in resized coordinates.
    """
    with open(annotation_path, "rb") as fh:
        records = parse_annotations(fh.read())
    images, boxes, paths, sizes = [], [], [], []
    for path, gts in records:
        with open(_resolve(cfg, path), "rb") as fh:
            img = load_image(fh.read())
        sample = preprocess(img, gts, cfg.image_w, cfg.image_h, mean=0.0, std=1.0, source_id=path)
        images.append(sample.image)
        boxes.append(sample.gts)
        paths.append(path)
        sizes.append((img.shape[1], img.shape[0]))
    return images, boxes, paths, sizes


def make_estimator(cfg: RunConfig):
    from .estimator import HeadDetector

    if cfg.stride != 16:
        raise ConfigError("the network has a fixed stride of 16")
    return HeadDetector(
        anchor_sizes=cfg.anchor_sizes, channels=cfg.channels, conv6_channels=cfg.conv6_channels,
        init_sigma=cfg.init_sigma, backbone_init=cfg.backbone_init, lr=cfg.lr, lr_decay=cfg.lr_decay,
        decay_after_epochs=cfg.decay_after_epochs, epochs=cfg.epochs, weight_decay=cfg.weight_decay,
        pos_iou=cfg.pos_iou, neg_iou=cfg.neg_iou, batch_size=cfg.batch_size, pos_fraction=cfg.pos_fraction,
        nms_iou=cfg.nms_iou, score_threshold=cfg.score_threshold, max_detections=cfg.max_detections,
        normalize=cfg.normalize, random_state=cfg.rng_seed,
    )


def cmd_train(cfg: RunConfig):
    from . import net

    if not cfg.train_annotations:
        raise ConfigError("train_annotations is required")
    images, boxes, _, _ = load_dataset(cfg, cfg.train_annotations)
    os.makedirs(cfg.out_dir, exist_ok=True)
    est = make_estimator(cfg)
    ckpt_cfg = est.net_config()

    def on_epoch(epoch, params):
        with open(os.path.join(cfg.out_dir, f"epoch_{epoch:03d}.ckpt"), "wb") as fh:
            fh.write(net.save_params(params, ckpt_cfg))

    log = []
    est.fit(images, boxes, on_epoch=on_epoch, log=log)
    with open(os.path.join(cfg.out_dir, "loss.csv"), "w", encoding="utf-8") as fh:
        fh.write(LOG_HEADER + "\n")
        fh.writelines(format_log_row(row) + "\n" for row in log)
    final = cfg.checkpoint or os.path.join(cfg.out_dir, "model.ckpt")
    est.save(final)
    print(f"wrote {final}")
    return 0


def _load_estimator(cfg):
    from .estimator import HeadDetector

    if not cfg.checkpoint:
        raise ConfigError("checkpoint is required")
    return HeadDetector.load(cfg.checkpoint)


def _run_detector(cfg, annotation_path):
    est = _load_estimator(cfg)
    images, _, paths, sizes = load_dataset(cfg, annotation_path)
    dets = est.predict(images, score_threshold=cfg.score_threshold)
    out = []
    for d, (w, h) in zip(dets, sizes):
        scale = np.array([w / cfg.image_w, h / cfg.image_h] * 2)
        out.append((d.boxes * scale, d.scores))
    return paths, out


def cmd_detect(cfg: RunConfig, images_path=None):
    path = images_path or cfg.test_annotations
    if not path:
        raise ConfigError("an image list is required (--images or test_annotations)")
    paths, dets = _run_detector(cfg, path)
    os.makedirs(cfg.out_dir, exist_ok=True)
    out = os.path.join(cfg.out_dir, "detections.txt")
    with open(out, "w", encoding="utf-8") as fh:
        for p, (boxes, scores) in zip(paths, dets):
            fh.write(format_record(p, boxes, scores) + "\n")
    print(f"wrote {out}")
    return 0


def cmd_eval(cfg: RunConfig, detections_path=None):
    if not cfg.test_annotations:
        raise ConfigError("test_annotations is required")
    with open(cfg.test_annotations, "rb") as fh:
        gt_records = parse_annotations(fh.read())
    if detections_path:
        with open(detections_path, "rb") as fh:
            det_records = {p: (b, s) for p, b, s in parse_annotations(fh.read(), with_scores=True)}
    else:
        # full curve: keep every detection regardless of score
        from dataclasses import replace

        paths, dets = _run_detector(replace(cfg, score_threshold=0.0), cfg.test_annotations)
        det_records = dict(zip(paths, dets))
    results = []
    for path, gts in gt_records:
        boxes, scores = det_records.get(path, (np.zeros((0, 4)), np.zeros(0)))
        results.append(match_detections(boxes, scores, gts, cfg.eval_iou))
    curve = pr_curve(MatchResult.concatenate(results))
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "pr_curve.csv"), "w", encoding="utf-8") as fh:
        fh.write(curve.to_csv())
    print(f"AP {curve.ap:.4f}")
    return 0


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "design-anchors":
            return cmd_design_anchors(args)
        cfg = _run_config(args)
        if args.command == "make-synth":
            return cmd_make_synth(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "detect":
            return cmd_detect(cfg, args.images)
        return cmd_eval(cfg, args.detections)
    except (HeadDetError, OSError, ValueError) as exc:
        print(f"headdet {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
