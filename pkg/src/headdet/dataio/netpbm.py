"""Binary PPM (P6) and PGM (P5) images, 8 bits per sample."""

import re

import numpy as np

from ..exceptions import FormatError

_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


def _header(data):
    if data[:2] not in (b"P5", b"P6"):
        raise FormatError(f"unsupported magic {data[:2]!r}; expected P5 or P6")
    pos = 2
    values = []
    for _ in range(3):
        m = _TOKEN.match(data, pos)
        if m is None or not m.group(1).isdigit():
            raise FormatError("malformed netpbm header")
        values.append(int(m.group(1)))
        pos = m.end()
    if pos >= len(data) or data[pos:pos + 1] not in b" \t\r\n":
        raise FormatError("missing whitespace after netpbm header")
    return data[:2], values, pos + 1


def load_image(data):
    """Decode a P6 or P5 image to ``(H, W, 3)`` float64 in [0, 1].

    Grayscale images are replicated across three channels.

    Raises:
        FormatError: unsupported magic, maxval above 255, or truncated pixels.
    """
    data = bytes(data)
    magic, (width, height, maxval), offset = _header(data)
    if not 0 < maxval <= 255:
        raise FormatError(f"only 8-bit images are supported (maxval {maxval})")
    if width == 0 or height == 0:
        raise FormatError("image has zero size")
    channels = 3 if magic == b"P6" else 1
    n = width * height * channels
    payload = data[offset:offset + n]
    if len(payload) < n:
        raise FormatError(f"truncated pixel data: expected {n} bytes, got {len(payload)}")
    img = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    img = img.astype(np.float64) / maxval
    if channels == 1:
        img = np.repeat(img, 3, axis=2)
    return img


def to_uint8(image):
    return np.clip(np.rint(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def encode_ppm(image):
    """Encode an ``(H, W, 3)`` [0, 1] float image (or uint8) as P6 bytes."""
    image = np.asarray(image)
    if image.dtype != np.uint8:
        image = to_uint8(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {image.shape}")
    h, w, _ = image.shape
    return b"P6\n%d %d\n255\n" % (w, h) + image.tobytes()


def encode_pgm(image):
    image = np.asarray(image)
    if image.dtype != np.uint8:
        image = to_uint8(image)
    h, w = image.shape[:2]
    return b"P5\n%d %d\n255\n" % (w, h) + image.reshape(h, w).tobytes()
