"""Single-image SGD training loop and dataset-level evaluation."""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from . import net
from .anchors import AnchorGrid, AssignmentConfig, assign_labels, sample_minibatch
from .evaluation import MatchResult, PRCurve, match_detections, pr_curve
from .exceptions import EmptySampleError, HeadDetError
from .loss import LossBreakdown, multitask_loss

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LogRow:
    iteration: int
    total: float
    cls_term: float
    reg_term: float
    lr: float


LOG_HEADER = "iteration,total,cls_term,reg_term,lr"


def format_log_row(row: LogRow):
    return f"{row.iteration},{row.total:.9g},{row.cls_term:.9g},{row.reg_term:.9g},{row.lr:.9g}"


def train_step(params, image, labeled, lr, weight_decay):
    """Forward, loss, backward and one SGD update on a single image."""
    reg, cls, cache = net.forward(params, image)
    breakdown, d_cls, d_reg = multitask_loss(cls, reg, labeled)
    grads, _ = net.backward(params, cache, d_reg, d_cls)
    return net.sgd_step(params, grads, lr, weight_decay), breakdown


def train(
    params,
    images,
    gts,
    grid: AnchorGrid,
    assign_cfg: AssignmentConfig,
    train_cfg: net.TrainConfig,
    rng_seed=0,
    on_epoch: Optional[Callable[[int, dict], None]] = None,
    log: Optional[List[LogRow]] = None,
):
    """Train for ``train_cfg.epochs`` passes over the images, one image per step.

    Images are visited in a fresh seeded permutation every epoch and each step
    draws a new anchor minibatch. Images with no labeled anchors are skipped.

    Args:
        params: initial parameters (not modified)
        images: sequence of preprocessed (H, W, 3) arrays
        gts: sequence of (k, 4) boxes per image
        on_epoch: called as ``on_epoch(epoch, params)`` after every epoch
        log: if given, one :class:`LogRow` per step is appended

    Returns:
        the trained parameters
    """
    rng = np.random.default_rng(rng_seed)
    labels = [assign_labels(grid, g, assign_cfg) for g in gts]
    iteration = 0
    for epoch in range(train_cfg.epochs):
        lr = net.lr_at_epoch(train_cfg, epoch)
        running = 0.0
        steps = 0
        for i in rng.permutation(len(images)):
            try:
                labeled = sample_minibatch(labels[i], assign_cfg, rng)
            except EmptySampleError:
                continue
            params, br = train_step(params, images[i], labeled, lr, train_cfg.weight_decay)
            if not np.isfinite(br.total):
                raise HeadDetError(f"loss became non-finite at iteration {iteration}")
            if log is not None:
                log.append(LogRow(iteration, br.total, br.cls_term, br.reg_term, lr))
            running += br.total
            steps += 1
            iteration += 1
        logger.info("epoch %d  lr %.3g  mean loss %.4f", epoch, lr, running / max(steps, 1))
        if on_epoch is not None:
            on_epoch(epoch, params)
    return params


def evaluate_dataset(detect_fn, images, gts, eval_iou=0.5):
    """Pool detections over a dataset and compute the PR curve.

    Args:
        detect_fn: ``detect_fn(image) -> Detections``
        images, gts: parallel sequences

    Returns:
        (PRCurve, per-image list of ``(n_det, n_tp, n_gt)``)
    """
    if len(images) == 0:
        raise ValueError("empty dataset")
    results = []
    counts = []
    for img, g in zip(images, gts):
        dets = detect_fn(img)
        m = match_detections(dets.boxes, dets.scores, g, eval_iou)
        results.append(m)
        counts.append((len(dets), int(m.tp.sum()), m.n_gt))
    return pr_curve(MatchResult.concatenate(results)), counts
