import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from headdet import geometry
from headdet.anchors import (
    IGNORE,
    NEGATIVE,
    POSITIVE,
    AnchorConfig,
    AssignmentConfig,
    LabeledAnchorSet,
    assign_labels,
    generate_anchor_grid,
    sample_minibatch,
)
from headdet.exceptions import ConfigError, EmptySampleError


def brute_iou(a, b):
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    return inter / ((a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter)


def labeled_set(n_pos, n_neg, n_ignore=10):
    labels = np.array([POSITIVE] * n_pos + [NEGATIVE] * n_neg + [IGNORE] * n_ignore, dtype=np.int8)
    n = len(labels)
    return LabeledAnchorSet(labels, np.full(n, -1), np.zeros((n, 4)), np.zeros(n, dtype=bool))


def test_full_size_anchor_count():
    grid = generate_anchor_grid(AnchorConfig(16, (32, 64), 640, 480))
    assert len(grid) == 40 * 30 * 2 == 2400


def test_single_cell_centering():
    grid = generate_anchor_grid(AnchorConfig(16, (32,), 16, 16))
    np.testing.assert_array_equal(grid.boxes, [[-8, -8, 24, 24]])


def test_small_grid_count_and_order():
    cfg = AnchorConfig(16, (16, 32), 128, 128)
    grid = generate_anchor_grid(cfg)
    assert len(grid) == 128
    # anchor (i * feat_w + j) * N + k is centred on cell (i, j)
    i, j, k = 2, 5, 1
    box = grid.boxes[(i * cfg.feat_w + j) * 2 + k]
    np.testing.assert_array_equal(box, [(j + 0.5) * 16 - 16, (i + 0.5) * 16 - 16,
                                        (j + 0.5) * 16 + 16, (i + 0.5) * 16 + 16])


@settings(max_examples=50)
@given(st.integers(1, 40), st.integers(1, 40), st.sampled_from([4, 8, 16]),
       st.lists(st.integers(4, 128), min_size=1, max_size=3))
def test_anchor_count_formula(fw, fh, stride, sizes):
    cfg = AnchorConfig(stride, sizes, fw * stride, fh * stride)
    assert len(generate_anchor_grid(cfg)) == fw * fh * len(sizes)


def test_non_integer_feature_map():
    with pytest.raises(ConfigError):
        AnchorConfig(16, (32,), 100, 64)


def test_assignment_config_validation():
    with pytest.raises(ConfigError):
        AssignmentConfig(pos_iou=0.3, neg_iou=0.3)
    with pytest.raises(ConfigError):
        AssignmentConfig(batch_size=31)


def small_grid(sizes=(32,)):
    return generate_anchor_grid(AnchorConfig(16, sizes, 128, 128))


def test_no_gts_all_inside_negative():
    grid = small_grid()
    lab = assign_labels(grid, np.zeros((0, 4)))
    inside = geometry.inside_image(grid.boxes, 128, 128)
    assert not (lab.labels == POSITIVE).any()
    assert (lab.labels[inside] == NEGATIVE).all()
    assert (lab.labels[~inside] == IGNORE).all()


def test_exact_match_positive():
    grid = small_grid()
    k = 3 * 8 + 3
    gt = grid.boxes[k].copy()
    lab = assign_labels(grid, gt[None])
    assert lab.labels[k] == POSITIVE
    assert lab.matched_gt[k] == 0
    np.testing.assert_array_equal(lab.targets[k], 0)
    ious = geometry.iou_matrix(grid.boxes, gt[None])[:, 0]
    inside = geometry.inside_image(grid.boxes, 128, 128)
    assert (lab.labels[inside & (ious <= 0.3)] == NEGATIVE).all()


def test_strategy_two_below_threshold():
    grid = small_grid()
    k = 3 * 8 + 3                       # anchor (40, 40, 72, 72)
    side = 32 / math.sqrt(0.55)         # concentric gt with IoU 0.55
    gt = np.array([56 - side / 2, 56 - side / 2, 56 + side / 2, 56 + side / 2])
    brute = [brute_iou(a, gt) for a in grid.boxes]
    assert max(brute) == pytest.approx(0.55, abs=1e-12)
    assert int(np.argmax(brute)) == k
    lab = assign_labels(grid, gt[None])
    assert np.flatnonzero(lab.labels == POSITIVE).tolist() == [k]
    mid = [i for i, v in enumerate(brute) if 0.3 < v < 0.55]
    assert mid and all(lab.labels[i] == IGNORE for i in mid)


def test_strategy_two_ties_all_positive():
    grid = small_grid()
    # gt centred between two horizontally adjacent anchors: equal IoU with both
    gt = np.array([48.0, 40.0, 80.0, 72.0])
    lab = assign_labels(grid, gt[None])
    pos = np.flatnonzero(lab.labels == POSITIVE)
    assert len(pos) == 2


def test_neg_threshold_closed():
    grid = small_grid()
    k = 3 * 8 + 3
    gt = grid.boxes[k].copy()
    ious = geometry.iou_matrix(grid.boxes, gt[None])[:, 0]
    # put the negative threshold exactly on an observed IoU value
    v = float(ious[(ious > 0) & (ious < 0.7)].min())
    lab = assign_labels(grid, gt[None], AssignmentConfig(pos_iou=0.7, neg_iou=v))
    hit = (ious == v) & geometry.inside_image(grid.boxes, 128, 128)
    assert hit.any() and (lab.labels[hit] == NEGATIVE).all()


def random_scene(rng, n_gt, size=128):
    wh = rng.uniform(8, 64, size=(n_gt, 2))
    xy = rng.uniform(0, size - wh)
    return np.hstack([xy, xy + wh])


def test_random_scene_properties():
    rng = np.random.default_rng(7)
    grid = small_grid((16, 32))
    inside = geometry.inside_image(grid.boxes, 128, 128)
    cfg = AssignmentConfig()
    for _ in range(100):
        gts = random_scene(rng, int(rng.integers(0, 6)))
        lab = assign_labels(grid, gts, cfg)
        assert set(np.unique(lab.labels)) <= {POSITIVE, NEGATIVE, IGNORE}
        assert (lab.labels[~inside] == IGNORE).all()
        if len(gts):
            ious = geometry.iou_matrix(grid.boxes, gts)
            for g in range(len(gts)):
                if (ious[inside, g] > 0).any():
                    assert (lab.labels[ious[:, g] > 0] == POSITIVE).any()
        s = sample_minibatch(lab, cfg, rng_seed=int(rng.integers(1 << 30))) if (lab.labels >= 0).any() else None
        if s is None:
            continue
        assert (s.labels[s.sample_mask] != IGNORE).all()
        pos = np.flatnonzero(s.sample_mask & (s.labels == POSITIVE))
        if len(pos):
            back = geometry.decode(grid.boxes[pos], s.targets[pos])
            np.testing.assert_allclose(back, gts[s.matched_gt[pos]], rtol=1e-9, atol=1e-9)


def test_matched_gt_is_argmax_lowest_index():
    grid = small_grid()
    k = 3 * 8 + 3
    gt = grid.boxes[k].copy()
    lab = assign_labels(grid, np.stack([gt, gt]))
    assert lab.matched_gt[k] == 0


@pytest.mark.parametrize("n_pos, n_neg, exp_pos, exp_neg", [
    (20, 500, 16, 16),
    (4, 500, 4, 28),
    (0, 10, 0, 10),
])
def test_sample_counts(n_pos, n_neg, exp_pos, exp_neg):
    s = sample_minibatch(labeled_set(n_pos, n_neg), AssignmentConfig(), rng_seed=0)
    assert int((s.sample_mask & (s.labels == POSITIVE)).sum()) == exp_pos
    assert int((s.sample_mask & (s.labels == NEGATIVE)).sum()) == exp_neg
    assert not (s.sample_mask & (s.labels == IGNORE)).any()


def test_sample_deterministic_per_seed():
    lab = labeled_set(40, 500)
    a = sample_minibatch(lab, rng_seed=11).sample_mask
    b = sample_minibatch(lab, rng_seed=11).sample_mask
    c = sample_minibatch(lab, rng_seed=12).sample_mask
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_empty():
    with pytest.raises(EmptySampleError):
        sample_minibatch(labeled_set(0, 0), rng_seed=0)


def test_sample_does_not_mutate_input():
    lab = labeled_set(20, 50)
    sample_minibatch(lab, rng_seed=0)
    assert not lab.sample_mask.any()
