import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from headdet import geometry
from headdet.exceptions import InvalidBoxError, InvalidDeltaError


def loop_iou(a, b):
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def random_boxes(rng, n, lo=0.0, hi=100.0, min_size=0.5):
    xy = rng.uniform(lo, hi, size=(n, 2))
    wh = rng.uniform(min_size, 50.0, size=(n, 2))
    return np.hstack([xy, xy + wh])


coord = st.floats(-200, 200, allow_nan=False)
size = st.floats(0.5, 100, allow_nan=False)


@st.composite
def boxes(draw):
    x, y, w, h = draw(coord), draw(coord), draw(size), draw(size)
    return np.array([x, y, x + w, y + h])


@pytest.mark.parametrize("box, expected", [
    ((0, 0, 10, 10), 100.0),
    ((5, 5, 5, 9), 0.0),
    ((0, 0, 32, 64), 2048.0),
    ((10, 10, 0, 0), 0.0),
])
def test_area(box, expected):
    assert geometry.area(box) == expected


def test_iou_examples():
    assert geometry.iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
    assert geometry.iou((0, 0, 1, 1), (5, 5, 6, 6)) == 0.0
    assert geometry.iou((0, 0, 10, 10), (5, 0, 15, 10)) == pytest.approx(1 / 3, abs=1e-15)


def test_iou_zero_union():
    assert geometry.iou((1, 1, 1, 1), (1, 1, 1, 1)) == 0.0


def test_iou_matrix_shapes():
    b = np.array([[0, 0, 4, 4]])
    np.testing.assert_array_equal(geometry.iou_matrix(b, b), [[1.0]])
    assert geometry.iou_matrix(np.zeros((2, 4)) + [0, 0, 1, 1], np.zeros((0, 4))).shape == (2, 0)


def test_iou_matrix_matches_loop():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = random_boxes(rng, 5)
        b = random_boxes(rng, 3)
        expected = np.array([[loop_iou(x, y) for y in b] for x in a])
        np.testing.assert_allclose(geometry.iou_matrix(a, b), expected, rtol=0, atol=1e-15)


@settings(max_examples=200)
@given(boxes(), boxes())
def test_iou_symmetric_and_bounded(a, b):
    v = geometry.iou(a, b)
    assert v == geometry.iou(b, a)
    assert 0.0 <= v <= 1.0
    assert geometry.iou(a, a) == 1.0


def test_encode_examples():
    anchor = (0, 0, 32, 32)
    np.testing.assert_array_equal(geometry.encode(anchor, anchor), [0, 0, 0, 0])
    # gt centre (24, 16), size 64 x 32
    gt = (24 - 32, 0, 24 + 32, 32)
    np.testing.assert_allclose(geometry.encode(anchor, gt), [0.25, 0, math.log(2), 0], atol=1e-15)


def test_decode_examples():
    anchor = np.array([0, 0, 32, 32.0])
    np.testing.assert_array_equal(geometry.decode(anchor, [0, 0, 0, 0]), anchor)
    out = geometry.decode(anchor, [0.25, 0, math.log(2), 0])
    np.testing.assert_allclose(out, [-8, 0, 56, 32], atol=1e-12)


def test_encode_rejects_degenerate():
    with pytest.raises(InvalidBoxError):
        geometry.encode((0, 0, 0, 10), (0, 0, 5, 5))
    with pytest.raises(InvalidBoxError):
        geometry.encode((0, 0, 10, 10), (5, 5, 4, 9))


def test_decode_rejects_nonfinite():
    with pytest.raises(InvalidDeltaError):
        geometry.decode((0, 0, 10, 10), [np.nan, 0, 0, 0])
    with pytest.raises(InvalidDeltaError):
        geometry.decode((0, 0, 10, 10), [0, 0, np.inf, 0])


def test_round_trip_many_pairs():
    rng = np.random.default_rng(0)
    anchors = random_boxes(rng, 10_000)
    gts = random_boxes(rng, 10_000)
    back = geometry.decode(anchors, geometry.encode(anchors, gts))
    scale = np.maximum(np.abs(gts), 1.0)
    assert np.max(np.abs(back - gts) / scale) < 1e-9


def test_inverse_round_trip_on_deltas():
    rng = np.random.default_rng(1)
    anchors = random_boxes(rng, 10_000)
    deltas = rng.uniform(-1, 1, size=(10_000, 4))
    deltas[:, 2:] *= 4
    again = geometry.encode(anchors, geometry.decode(anchors, deltas))
    np.testing.assert_allclose(again, deltas, rtol=0, atol=1e-9)


def test_clip_to_image():
    assert geometry.clip_to_image((1, 2, 3, 4), 640, 480).tolist() == [1, 2, 3, 4]
    assert geometry.clip_to_image((-5, -5, 10, 10), 640, 480).tolist() == [0, 0, 10, 10]
    out = geometry.clip_to_image((700, 500, 800, 600), 640, 480)
    assert geometry.area(out) == 0


@given(boxes())
def test_clip_idempotent(b):
    once = geometry.clip_to_image(b, 64, 48)
    np.testing.assert_array_equal(geometry.clip_to_image(once, 64, 48), once)


@pytest.mark.parametrize("box, inside", [
    ((0, 0, 32, 32), True),
    ((624, 0, 656, 32), False),
    ((608, 448, 640, 480), True),
    ((-0.5, 0, 10, 10), False),
])
def test_inside_image(box, inside):
    assert bool(geometry.inside_image(box, 640, 480)) is inside
