"""Two-term detection loss: softmax cross-entropy plus smooth-L1 box regression.

    L = (1 / n_cls) * sum_{sampled} CE(p_i, p*_i)
      + (1 / n_reg) * sum_{sampled} p*_i * sum_coord smoothL1(t_i - t*_i)

``n_cls`` is the number of sampled anchors and ``n_reg`` the number of sampled
positives. Class channel 1 of each anchor's logit pair is "head".
"""

from dataclasses import dataclass

import numpy as np

from .anchors import POSITIVE, LabeledAnchorSet
from .exceptions import EmptySampleError, ShapeError


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    cls_term: float
    reg_term: float
    n_cls: int
    n_reg: int


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Cross-entropy of two-class logits against integer labels.

    Works on a single pair or on ``(n, 2)`` arrays.

    Returns:
        (loss, grad) where ``grad = softmax(logits) - one_hot(label)``
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    z = logits - logits.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=-1))
    picked = np.take_along_axis(z, labels[..., None], axis=-1)[..., 0]
    loss = log_norm - picked
    grad = _softmax(logits)
    np.put_along_axis(grad, labels[..., None], np.take_along_axis(grad, labels[..., None], -1) - 1.0, -1)
    if loss.ndim == 0:
        return float(loss), grad
    return loss, grad


def smooth_l1(x):
    """Returns (value, derivative); quadratic for |x| < 1, linear outside."""
    x = np.asarray(x, dtype=np.float64)
    small = np.abs(x) < 1
    value = np.where(small, 0.5 * x * x, np.abs(x) - 0.5)
    deriv = np.where(small, x, np.sign(x))
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


def multitask_loss(cls_out, reg_out, labeled: LabeledAnchorSet):
    """Loss over the sampled anchors and its gradient w.r.t. both head outputs.

    Args:
        cls_out: (H, W, N*2) class logits
        reg_out: (H, W, N*4) predicted deltas
        labeled: labels with ``sample_mask`` set

    Returns:
        (LossBreakdown, d_cls, d_reg); gradients have the head shapes and are
        zero outside sampled anchors (and, for d_reg, outside sampled positives).
    """
    cls_out = np.asarray(cls_out)
    reg_out = np.asarray(reg_out)
    n = len(labeled.labels)
    if cls_out.size != 2 * n or reg_out.size != 4 * n:
        raise ShapeError(
            f"head outputs {cls_out.shape}/{reg_out.shape} do not match {n} anchors"
        )
    logits = cls_out.reshape(n, 2).astype(np.float64)
    deltas = reg_out.reshape(n, 4).astype(np.float64)

    sampled = np.flatnonzero(labeled.sample_mask)
    if len(sampled) == 0:
        raise EmptySampleError("no sampled anchors")
    targets_cls = (labeled.labels[sampled] == POSITIVE).astype(np.int64)
    ce, ce_grad = softmax_cross_entropy(logits[sampled], targets_cls)
    n_cls = len(sampled)
    cls_term = float(ce.sum() / n_cls)
    d_logits = np.zeros((n, 2))
    d_logits[sampled] = ce_grad / n_cls

    pos = sampled[targets_cls == 1]
    n_reg = len(pos)
    d_deltas = np.zeros((n, 4))
    reg_term = 0.0
    if n_reg:
        value, deriv = smooth_l1(deltas[pos] - labeled.targets[pos])
        reg_term = float(value.sum() / n_reg)
        d_deltas[pos] = deriv / n_reg

    breakdown = LossBreakdown(cls_term + reg_term, cls_term, reg_term, n_cls, n_reg)
    return (
        breakdown,
        d_logits.reshape(cls_out.shape).astype(cls_out.dtype, copy=False),
        d_deltas.reshape(reg_out.shape).astype(reg_out.dtype, copy=False),
    )
