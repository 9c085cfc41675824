"""PASCAL-style detection matching, precision/recall curves and average precision."""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from . import geometry
from .exceptions import UndefinedRecallError


@dataclass
class MatchResult:
    """Per-detection true/false positive flags in descending-score order.

    Attributes:
        scores: (n,) detection scores, descending
        tp: (n,) bool
        n_gt: number of ground-truth boxes
    """

    scores: np.ndarray
    tp: np.ndarray
    n_gt: int

    @classmethod
    def concatenate(cls, results: Sequence["MatchResult"]):
        if not results:
            return cls(np.zeros(0), np.zeros(0, dtype=bool), 0)
        return cls(
            np.concatenate([r.scores for r in results]),
            np.concatenate([r.tp for r in results]),
            sum(r.n_gt for r in results),
        )


@dataclass
class PRCurve:
    points: List[Tuple[float, float]]
    ap: float

    def to_csv(self):
        rows = ["recall,precision"]
        rows += [f"{r:.6f},{p:.6f}" for r, p in self.points]
        return "\n".join(rows) + "\n"


def match_detections(boxes, scores, gts, iou_threshold=0.5) -> MatchResult:
    """Greedy VOC matching for one image.

    Detections are visited by descending score (stable for ties). Each takes the
    unmatched gt with the highest IoU, lowest index first on ties, when that IoU
    is at least ``iou_threshold``; otherwise it is a false positive. A second
    detection on an already matched gt is therefore a false positive.
    """
    boxes = geometry.as_boxes(boxes).reshape(-1, 4)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    gts = geometry.as_boxes(gts).reshape(-1, 4)
    order = np.argsort(-scores, kind="stable")
    boxes, scores = boxes[order], scores[order]
    tp = np.zeros(len(scores), dtype=bool)
    if len(gts) and len(boxes):
        ious = geometry.iou_matrix(boxes, gts)
        taken = np.zeros(len(gts), dtype=bool)
        for i in range(len(boxes)):
            cand = np.where(taken, -1.0, ious[i])
            j = int(cand.argmax())
            if cand[j] >= iou_threshold:
                tp[i] = True
                taken[j] = True
    return MatchResult(scores, tp, len(gts))


def pr_curve(matches: MatchResult) -> PRCurve:
    """Precision/recall at every rank of the pooled list, and all-points AP.

    AP is the area under the precision envelope ``p_interp(r) = max_{r' >= r} p(r')``
    over recall.

    Raises:
        UndefinedRecallError: no ground-truth boxes.
    """
    if matches.n_gt == 0:
        raise UndefinedRecallError("recall is undefined without ground-truth boxes")
    order = np.argsort(-matches.scores, kind="stable")
    tp = matches.tp[order].astype(np.float64)
    ctp = np.cumsum(tp)
    cfp = np.cumsum(1.0 - tp)
    recall = ctp / matches.n_gt
    precision = ctp / np.maximum(ctp + cfp, np.finfo(np.float64).tiny)
    if len(tp) == 0:
        return PRCurve([], 0.0)

    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.flatnonzero(mrec[1:] != mrec[:-1]) + 1
    ap = float(np.sum((mrec[steps] - mrec[steps - 1]) * mpre[steps]))
    return PRCurve(list(zip(recall.tolist(), precision.tolist())), ap)


def average_precision(matches: MatchResult) -> float:
    return pr_curve(matches).ap
