"""Theoretical receptive field of conv/pool stacks and anchor-size design.

The receptive field recursion starts from a single input pixel
(``rf = 1, jump = 1``) and for each layer applies::

    rf   <- rf + (kernel - 1) * jump
    jump <- jump * stride

Anchor sizes are then chosen against the *effective* receptive field, which is
estimated as the theoretical one divided by a ``shrink`` factor (3.5 by
default), snapped down to a power of two.
"""

import math
from dataclasses import dataclass, field
from typing import List, Sequence

from .exceptions import EmptyStackError, NoValidScaleError


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    kernel: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.kind not in ("conv", "pool"):
            raise ValueError(f"kind must be 'conv' or 'pool', got {self.kind!r}")
        if self.kernel < 1 or self.stride < 1 or self.padding < 0:
            raise ValueError(f"invalid layer geometry: {self}")


@dataclass(frozen=True)
class RFState:
    rf: int
    jump: int


@dataclass
class AnchorDesign:
    scales: List[int]
    sizes: List[float]
    stride: int
    aspect_ratio: float = 1.0
    effective_rf: float = field(default=float("nan"))


def conv(kernel=3, stride=1, padding=1):
    return LayerSpec("conv", kernel, stride, padding)


def pool(kernel=2, stride=2):
    return LayerSpec("pool", kernel, stride, 0)


# conv1_1 .. conv5_3; pool5 is not part of the conv5 feature map.
VGG16_CONV5 = (
    [conv(), conv(), pool()]
    + [conv(), conv(), pool()]
    + [conv(), conv(), conv(), pool()]
    + [conv(), conv(), conv(), pool()]
    + [conv(), conv(), conv()]
)

# Four {conv, pool} blocks plus the 3x3 detection conv, as built by ``headdet.net``.
TINYNET_STACK = [layer for _ in range(4) for layer in (conv(), pool())] + [conv()]


def rf_step(state: RFState, layer: LayerSpec) -> RFState:
    return RFState(state.rf + (layer.kernel - 1) * state.jump, state.jump * layer.stride)


def rf_of_stack(layers: Sequence[LayerSpec]) -> RFState:
    """Receptive field and cumulative stride after the last layer of ``layers``.

    Padding does not enter the recursion; it only changes spatial sizes.
    """
    if len(layers) == 0:
        raise EmptyStackError("layer stack is empty")
    state = RFState(1, 1)
    for layer in layers:
        state = rf_step(state, layer)
    return state


def anchor_size(stride, aspect_ratio, scale):
    """Anchor side length: ``stride * aspect_ratio * scale``."""
    return stride * aspect_ratio * scale


def design_anchor_scales(rf: RFState, shrink=3.5, n_scales=2, aspect_ratio=1.0) -> AnchorDesign:
    """Recommend anchor sizes that fit the effective receptive field.

    The largest size is the largest power of two not exceeding ``rf.rf / shrink``;
    each further scale halves the previous one. Scales are the sizes expressed in
    units of ``rf.jump * aspect_ratio``.

    Raises:
        NoValidScaleError: if the effective field is smaller than one stride, or
            halving produces a size that is not a whole number of strides.
    """
    if shrink < 1:
        raise ValueError("shrink must be >= 1")
    if n_scales < 1:
        raise ValueError("n_scales must be >= 1")
    effective = rf.rf / shrink
    unit = rf.jump * aspect_ratio
    if effective < rf.jump:
        raise NoValidScaleError(
            f"effective receptive field {effective:.3g} is smaller than the stride {rf.jump}"
        )
    largest = 2 ** math.floor(math.log2(effective))
    sizes = sorted(largest / 2**i for i in range(n_scales))
    scales = []
    for size in sizes:
        scale = size / unit
        if scale < 1 or scale != int(scale):
            raise NoValidScaleError(
                f"size {size:g} is not a positive whole multiple of stride*aspect = {unit:g}"
            )
        scales.append(int(scale))
    sizes = [anchor_size(rf.jump, aspect_ratio, s) for s in scales]
    return AnchorDesign(scales, sizes, rf.jump, aspect_ratio, effective)


def format_design(design: AnchorDesign, rf: RFState = None) -> str:
    lines = []
    if rf is not None:
        lines.append(f"theoretical rf: {rf.rf}  stride: {rf.jump}")
    lines.append(f"effective rf estimate: {design.effective_rf:.2f}")
    lines.append(f"{'scale':>6} {'size':>8}")
    for scale, size in zip(design.scales, design.sizes):
        lines.append(f"{scale:>6d} {size:>8g}")
    return "\n".join(lines)
