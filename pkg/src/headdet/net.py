"""
Tiny fully convolutional detector network
=========================================

Four backbone blocks of ``3x3 conv (pad 1) -> ReLU -> 2x2 max-pool`` give a
stride-16 feature map; a 3x3 detection conv with ReLU follows, then two 1x1
heads: ``reg`` with ``N*4`` channels and ``cls`` with ``N*2`` channels.

Tensors are channel-last ``(H, W, C)``. Parameters are a plain ``dict`` of
numpy arrays keyed by layer name (``conv1_w``, ``conv1_b``, ..., ``reg_w``,
``cls_b``). Forward and backward are written out by hand.
"""

import io
import struct
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .exceptions import CacheError, ConfigError, DivergenceError, FormatError, ShapeError

STRIDE = 16
N_BLOCKS = 4
MAGIC = b"FCHD"
VERSION = 1

NetParams = Dict[str, np.ndarray]


@dataclass(frozen=True)
class NetConfig:
    """Network shape and initialisation.

    ``backbone_init`` selects how the four backbone convs are drawn: ``"he"``
    uses ``Normal(0, 2 / fan_in)`` as a stand-in for pretrained features,
    ``"sigma"`` uses ``init_sigma`` like the detection layers. The detection
    conv and both heads always use ``Normal(0, init_sigma**2)``.
    """

    channels: Tuple[int, ...] = (8, 16, 32, 64)
    conv6_channels: int = 64
    n_anchors: int = 2
    init_sigma: float = 0.01
    rng_seed: int = 0
    backbone_init: str = "he"
    in_channels: int = 3

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if len(self.channels) != N_BLOCKS:
            raise ConfigError(f"exactly {N_BLOCKS} backbone widths are required for stride {STRIDE}")
        if min(self.channels) < 1 or self.conv6_channels < 1 or self.n_anchors < 1:
            raise ConfigError("channel counts must be positive")
        if self.init_sigma < 0:
            raise ConfigError("init_sigma must be non-negative")
        if self.backbone_init not in ("he", "sigma"):
            raise ConfigError("backbone_init must be 'he' or 'sigma'")

    def param_shapes(self):
        shapes = {}
        c_in = self.in_channels
        for i, c_out in enumerate(self.channels, start=1):
            shapes[f"conv{i}_w"] = (3, 3, c_in, c_out)
            shapes[f"conv{i}_b"] = (c_out,)
            c_in = c_out
        shapes["conv6_w"] = (3, 3, c_in, self.conv6_channels)
        shapes["conv6_b"] = (self.conv6_channels,)
        shapes["reg_w"] = (1, 1, self.conv6_channels, 4 * self.n_anchors)
        shapes["reg_b"] = (4 * self.n_anchors,)
        shapes["cls_w"] = (1, 1, self.conv6_channels, 2 * self.n_anchors)
        shapes["cls_b"] = (2 * self.n_anchors,)
        return shapes


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    lr_decay: float = 0.1
    decay_after_epochs: int = 8
    epochs: int = 15
    weight_decay: float = 0.0005

    def __post_init__(self):
        if self.lr <= 0 or self.lr_decay <= 0 or self.epochs < 1 or self.weight_decay < 0:
            raise ConfigError("training hyperparameters must be positive")
        if not 0 <= self.decay_after_epochs <= self.epochs:
            raise ConfigError("decay_after_epochs must lie within [0, epochs]")


def is_weight(name):
    return name.endswith("_w")


def init_params(cfg: NetConfig, dtype=np.float32) -> NetParams:
    rng = np.random.default_rng(cfg.rng_seed)
    params = {}
    for name, shape in cfg.param_shapes().items():
        if not is_weight(name):
            params[name] = np.zeros(shape, dtype=dtype)
            continue
        if name.startswith("conv") and name != "conv6_w" and cfg.backbone_init == "he":
            sigma = np.sqrt(2.0 / np.prod(shape[:3]))
        else:
            sigma = cfg.init_sigma
        params[name] = (rng.standard_normal(shape) * sigma).astype(dtype)
    return params


def zeros_like(params: NetParams) -> NetParams:
    return {k: np.zeros_like(v) for k, v in params.items()}


# -- layer primitives -------------------------------------------------------


def _im2col3(x):
    h, w, _ = x.shape
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    return np.concatenate([xp[i:i + h, j:j + w] for i in range(3) for j in range(3)], axis=-1)


def _col2im3(dcols, c):
    h, w, _ = dcols.shape
    dxp = np.zeros((h + 2, w + 2, c), dtype=dcols.dtype)
    k = 0
    for i in range(3):
        for j in range(3):
            dxp[i:i + h, j:j + w] += dcols[:, :, k * c:(k + 1) * c]
            k += 1
    return dxp[1:-1, 1:-1]


def _conv3_forward(x, w, b):
    cols = _im2col3(x)
    out = cols @ w.reshape(-1, w.shape[-1]) + b
    return out, cols


def _conv3_backward(dout, cols, w, need_dx=True):
    c_out = w.shape[-1]
    d2 = dout.reshape(-1, c_out)
    dw = (cols.reshape(-1, cols.shape[-1]).T @ d2).reshape(w.shape)
    db = d2.sum(axis=0)
    dx = None
    if need_dx:
        dx = _col2im3(dout @ w.reshape(-1, c_out).T, w.shape[2])
    return dx, dw, db


def _pool_forward(x):
    h, w, c = x.shape
    win = x.reshape(h // 2, 2, w // 2, 2, c).transpose(0, 2, 4, 1, 3).reshape(h // 2, w // 2, c, 4)
    # argmax returns the first maximum in window scan order on ties
    idx = win.argmax(axis=-1)
    return np.take_along_axis(win, idx[..., None], axis=-1)[..., 0], idx


def _pool_backward(dout, idx):
    h2, w2, c = dout.shape
    dwin = np.zeros((h2, w2, c, 4), dtype=dout.dtype)
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
    return dwin.reshape(h2, w2, c, 2, 2).transpose(0, 3, 1, 4, 2).reshape(2 * h2, 2 * w2, c)


# -- network ----------------------------------------------------------------


def _check_image(params, image):
    image = np.asarray(image)
    if image.ndim != 3:
        raise ShapeError(f"image must be (H, W, C), got shape {image.shape}")
    h, w, c = image.shape
    if h % STRIDE or w % STRIDE or h == 0 or w == 0:
        raise ShapeError(f"image size {h}x{w} must be a positive multiple of {STRIDE}")
    if c != params["conv1_w"].shape[2]:
        raise ShapeError(f"expected {params['conv1_w'].shape[2]} channels, got {c}")
    return image.astype(params["conv1_w"].dtype, copy=False)


def forward(params: NetParams, image):
    """Run the network on one ``(H, W, 3)`` image.

    Returns:
        reg: (H/16, W/16, N*4), cls: (H/16, W/16, N*2), and a cache for
        :func:`backward`.
    """
    x = _check_image(params, image)
    cache = {"params_id": id(params), "shapes": {k: v.shape for k, v in params.items()}}
    layers = []
    for i in range(1, N_BLOCKS + 1):
        z, cols = _conv3_forward(x, params[f"conv{i}_w"], params[f"conv{i}_b"])
        relu = z > 0
        x, idx = _pool_forward(z * relu)
        layers.append((cols, relu, idx))
    z, cols = _conv3_forward(x, params["conv6_w"], params["conv6_b"])
    relu = z > 0
    feat = z * relu
    layers.append((cols, relu, None))
    c6 = feat.shape[-1]
    reg = feat @ params["reg_w"].reshape(c6, -1) + params["reg_b"]
    cls = feat @ params["cls_w"].reshape(c6, -1) + params["cls_b"]
    cache.update(layers=layers, feat=feat, reg_shape=reg.shape, cls_shape=cls.shape)
    return reg, cls, cache


def backward(params: NetParams, cache, d_reg, d_cls, return_dimage=False):
    """Gradients of a scalar loss given its gradients w.r.t. both heads.

    Returns:
        (grads, d_image) where ``d_image`` is None unless ``return_dimage``.

    Raises:
        CacheError: the cache does not come from ``forward(params, ...)``.
        ShapeError: head gradients do not match the forward outputs.
    """
    if cache.get("params_id") != id(params) or cache["shapes"] != {k: v.shape for k, v in params.items()}:
        raise CacheError("cache was produced with different parameters")
    if np.shape(d_reg) != cache["reg_shape"] or np.shape(d_cls) != cache["cls_shape"]:
        raise ShapeError("head gradients do not match the cached forward pass")
    dtype = params["conv1_w"].dtype
    d_reg = np.asarray(d_reg, dtype=dtype)
    d_cls = np.asarray(d_cls, dtype=dtype)
    grads = {}
    feat = cache["feat"]
    c6 = feat.shape[-1]
    f2 = feat.reshape(-1, c6)
    grads["reg_w"] = (f2.T @ d_reg.reshape(-1, d_reg.shape[-1])).reshape(params["reg_w"].shape)
    grads["reg_b"] = d_reg.reshape(-1, d_reg.shape[-1]).sum(axis=0)
    grads["cls_w"] = (f2.T @ d_cls.reshape(-1, d_cls.shape[-1])).reshape(params["cls_w"].shape)
    grads["cls_b"] = d_cls.reshape(-1, d_cls.shape[-1]).sum(axis=0)
    d_feat = d_reg @ params["reg_w"].reshape(c6, -1).T + d_cls @ params["cls_w"].reshape(c6, -1).T

    cols, relu, _ = cache["layers"][N_BLOCKS]
    dx, grads["conv6_w"], grads["conv6_b"] = _conv3_backward(d_feat * relu, cols, params["conv6_w"])
    for i in range(N_BLOCKS, 0, -1):
        cols, relu, idx = cache["layers"][i - 1]
        dz = _pool_backward(dx, idx) * relu
        need_dx = i > 1 or return_dimage
        dx, grads[f"conv{i}_w"], grads[f"conv{i}_b"] = _conv3_backward(
            dz, cols, params[f"conv{i}_w"], need_dx=need_dx
        )
    grads = {k: grads[k].astype(dtype, copy=False) for k in params}
    return grads, (dx if return_dimage else None)


def sgd_step(params: NetParams, grads: NetParams, lr, weight_decay=0.0) -> NetParams:
    """Plain SGD: ``w - lr * (g + weight_decay * w)``; biases are not decayed.

    Raises:
        DivergenceError: a gradient is NaN or infinite.
    """
    if params.keys() != grads.keys():
        raise ShapeError("parameter and gradient names differ")
    out = {}
    for name, w in params.items():
        g = grads[name]
        if g.shape != w.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {w.shape}")
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient in {name}")
        if is_weight(name) and weight_decay:
            g = g + weight_decay * w
        out[name] = (w - lr * g).astype(w.dtype, copy=False)
    return out


def lr_at_epoch(cfg: TrainConfig, epoch):
    """Learning rate for 0-based ``epoch``; the decayed rate starts at index
    ``decay_after_epochs``."""
    if not 0 <= epoch < cfg.epochs:
        raise IndexError(f"epoch {epoch} outside [0, {cfg.epochs})")
    return cfg.lr * cfg.lr_decay if epoch >= cfg.decay_after_epochs else cfg.lr


# -- checkpoints ------------------------------------------------------------
#
# All little-endian:
#   "FCHD" | u32 version | config | u32 n_layers | n_layers * layer
#   config := u32 n_channels, n_channels * u32, u32 conv6, u32 n_anchors,
#             u32 in_channels, f64 init_sigma, i64 rng_seed, u32 len + utf8 backbone_init
#   layer  := u32 len + utf8 name, u32 ndim, ndim * u32, f32 data (C order)


def save_params(params: NetParams, cfg: NetConfig) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(struct.pack("<I", len(cfg.channels)))
    buf.write(struct.pack(f"<{len(cfg.channels)}I", *cfg.channels))
    buf.write(struct.pack("<III", cfg.conv6_channels, cfg.n_anchors, cfg.in_channels))
    buf.write(struct.pack("<dq", cfg.init_sigma, cfg.rng_seed))
    _write_str(buf, cfg.backbone_init)
    buf.write(struct.pack("<I", len(params)))
    for name, arr in params.items():
        _write_str(buf, name)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return buf.getvalue()


def load_params(data: bytes, expected: NetConfig = None):
    """Parse a checkpoint.

    Returns:
        (NetConfig, NetParams) with float32 arrays.

    Raises:
        FormatError: bad magic, unsupported version or truncated data.
        ShapeError: stored shapes disagree with the stored (or ``expected``) config.
    """
    reader = _Reader(data)
    if reader.take(4) != MAGIC:
        raise FormatError("not a checkpoint: bad magic")
    (version,) = reader.unpack("<I")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    (n_ch,) = reader.unpack("<I")
    channels = reader.unpack(f"<{n_ch}I")
    conv6, n_anchors, in_channels = reader.unpack("<III")
    init_sigma, rng_seed = reader.unpack("<dq")
    backbone_init = reader.string()
    try:
        cfg = NetConfig(channels, conv6, n_anchors, init_sigma, rng_seed, backbone_init, in_channels)
    except ConfigError as exc:
        raise FormatError(f"invalid stored config: {exc}") from exc
    shapes = (expected or cfg).param_shapes()
    (n_layers,) = reader.unpack("<I")
    params = {}
    for _ in range(n_layers):
        name = reader.string()
        (ndim,) = reader.unpack("<I")
        shape = tuple(reader.unpack(f"<{ndim}I"))
        if shapes.get(name) != shape:
            raise ShapeError(f"layer {name}: stored shape {shape} != expected {shapes.get(name)}")
        count = int(np.prod(shape))
        params[name] = np.frombuffer(reader.take(4 * count), dtype="<f4").reshape(shape).astype(np.float32)
    if set(params) != set(shapes):
        raise ShapeError(f"checkpoint layers {sorted(params)} do not match config")
    if not reader.done():
        raise FormatError("trailing bytes after checkpoint")
    return cfg, params


def _write_str(buf, s):
    b = s.encode("utf-8")
    buf.write(struct.pack("<I", len(b)))
    buf.write(b)


class _Reader:
    def __init__(self, data):
        self.data = memoryview(bytes(data))
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError("truncated checkpoint")
        out = bytes(self.data[self.pos:self.pos + n])
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self):
        (n,) = self.unpack("<I")
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("invalid string in checkpoint") from exc

    def done(self):
        return self.pos == len(self.data)
