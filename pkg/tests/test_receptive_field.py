import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from headdet import receptive_field as rf
from headdet.exceptions import EmptyStackError, NoValidScaleError


def unrolled_tinynet():
    # hand-unrolled recursion for 4 x (conv3, pool2/2) + conv3
    r, j = 1, 1
    for _ in range(4):
        r += 2 * j          # conv 3x3
        r += 1 * j          # pool 2x2
        j *= 2
    r += 2 * j              # conv6
    return r, j


def test_single_conv():
    assert rf.rf_of_stack([rf.conv()]) == rf.RFState(3, 1)


def test_conv_pool_conv():
    assert rf.rf_of_stack([rf.conv(), rf.pool(), rf.conv()]) == rf.RFState(8, 2)


def test_tinynet_stack():
    r, j = unrolled_tinynet()
    assert (r, j) == (78, 16)
    assert rf.rf_of_stack(rf.TINYNET_STACK) == rf.RFState(r, j)


def test_vgg16_conv5_recursion():
    # The recursion gives 196 for conv5_3 (212 after pool5), not 228.
    assert rf.rf_of_stack(rf.VGG16_CONV5) == rf.RFState(196, 16)


def test_empty_stack():
    with pytest.raises(EmptyStackError):
        rf.rf_of_stack([])


layers = st.builds(
    rf.LayerSpec,
    kind=st.sampled_from(["conv", "pool"]),
    kernel=st.integers(1, 7),
    stride=st.integers(1, 3),
    padding=st.integers(0, 3),
)


@given(st.lists(layers, min_size=1, max_size=12), layers)
def test_jump_is_stride_product_and_rf_monotone(stack, extra):
    state = rf.rf_of_stack(stack)
    assert state.jump == math.prod(layer.stride for layer in stack)
    assert rf.rf_of_stack(stack + [extra]).rf >= state.rf


@pytest.mark.parametrize("args, expected", [((16, 1, 2), 32), ((16, 1, 4), 64), ((1, 1, 1), 1)])
def test_anchor_size(args, expected):
    assert rf.anchor_size(*args) == expected


def test_design_rf228_case():
    d = rf.design_anchor_scales(rf.RFState(228, 16), 3.5, 2)
    assert d.sizes == [32, 64]
    assert d.scales == [2, 4]


def test_design_no_shrink():
    d = rf.design_anchor_scales(rf.RFState(32, 16), 1.0, 1)
    assert d.sizes == [32] and d.scales == [2]


def test_design_stride8():
    d = rf.design_anchor_scales(rf.RFState(120, 8), 3.5, 2)
    assert d.sizes == [16, 32] and d.scales == [2, 4]


def test_design_too_small():
    with pytest.raises(NoValidScaleError):
        rf.design_anchor_scales(rf.RFState(40, 16), 3.5, 1)


def test_design_halving_below_stride():
    with pytest.raises(NoValidScaleError):
        rf.design_anchor_scales(rf.RFState(228, 16), 3.5, 4)


@given(st.integers(16, 2000), st.sampled_from([4, 8, 16]), st.floats(1.0, 6.0), st.integers(1, 3))
def test_design_invariants(r, stride, shrink, n):
    try:
        d = rf.design_anchor_scales(rf.RFState(r, stride), shrink, n)
    except NoValidScaleError:
        return
    assert d.sizes == sorted(d.sizes)
    assert all(size == stride * 1.0 * scale for size, scale in zip(d.sizes, d.scales))
    assert max(d.sizes) <= r / shrink
