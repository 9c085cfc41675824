"""Input validation helpers for image stacks and box sets."""

import numpy as np

from .exceptions import InvalidBoxError, ShapeError


def check_images(X, same_size=False, multiple_of=None):
    """Validate a sequence (or 4-D array) of ``(H, W, C)`` images.

    Returns a list of float arrays. Raises :class:`ShapeError` on bad shapes
    and ``ValueError`` on non-finite pixels or an empty input.
    """
    if isinstance(X, np.ndarray) and X.ndim == 3:
        raise ShapeError("expected a sequence of images; wrap a single image in a list")
    images = []
    for img in X:
        img = np.asarray(img)
        # float32 is kept as-is so already standardised stacks are not copied
        images.append(img if img.dtype == np.float32 else img.astype(np.float64))
    if not images:
        raise ValueError("no images given")
    for i, img in enumerate(images):
        if img.ndim != 3 or img.shape[0] == 0 or img.shape[1] == 0:
            raise ShapeError(f"image {i}: expected (H, W, C), got {img.shape}")
        if multiple_of and (img.shape[0] % multiple_of or img.shape[1] % multiple_of):
            raise ShapeError(f"image {i}: size {img.shape[:2]} is not a multiple of {multiple_of}")
        if not np.all(np.isfinite(img)):
            raise ValueError(f"image {i}: contains non-finite values")
    if same_size and len({img.shape for img in images}) > 1:
        raise ShapeError("all images must have the same shape")
    return images


def check_boxes(boxes, allow_degenerate=False):
    b = np.asarray(boxes, dtype=np.float64)
    if b.size == 0:
        return np.zeros((0, 4))
    if b.ndim == 1:
        b = b.reshape(1, -1)
    if b.ndim != 2 or b.shape[1] != 4:
        raise ShapeError(f"boxes must be (k, 4), got {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("boxes contain non-finite values")
    if not allow_degenerate and np.any((b[:, 2] <= b[:, 0]) | (b[:, 3] <= b[:, 1])):
        raise InvalidBoxError("boxes must have positive width and height")
    return b


def check_box_sets(y, n_images):
    if len(y) != n_images:
        raise ShapeError(f"got {len(y)} box sets for {n_images} images")
    return [check_boxes(b) for b in y]
