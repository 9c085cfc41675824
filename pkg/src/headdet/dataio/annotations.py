"""Reading and writing box annotation lists.

One record per line::

    "path/to/image.ppm": (x1, y1, x2, y2), (x1, y1, x2, y2);
    "path/to/empty.ppm": ;

Detection files use the same layout with a trailing score per box.
"""

import re

import numpy as np

from ..exceptions import InvalidBoxError, ParseError

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_RECORD = re.compile(r'^\s*"([^"]*)"\s*:\s*(.*?)\s*;\s*$')


def _box_pattern(n_values):
    inner = r"\s*,\s*".join([f"({_NUM})"] * n_values)
    return re.compile(r"\(\s*" + inner + r"\s*\)")


_BOX4 = _box_pattern(4)
_BOX5 = _box_pattern(5)


def _parse_boxlist(body, pattern, lineno):
    values = []
    pos = 0
    while pos < len(body):
        m = pattern.match(body, pos)
        if m is None:
            raise ParseError(f"malformed box near {body[pos:pos + 20]!r}", lineno)
        values.append([float(v) for v in m.groups()])
        pos = m.end()
        sep = re.compile(r"\s*,\s*").match(body, pos)
        if sep is None:
            if pos != len(body):
                raise ParseError(f"expected ',' between boxes near {body[pos:pos + 20]!r}", lineno)
        else:
            pos = sep.end()
            if pos == len(body):
                raise ParseError("trailing ',' after last box", lineno)
    return values


def parse_annotations(data, with_scores=False):
    """Parse an annotation (or, with ``with_scores``, a detection) list.

    Args:
        data: bytes or str
        with_scores: expect a fifth number per box

    Returns:
        list of ``(path, boxes)`` with boxes shaped (k, 4), or
        ``(path, boxes, scores)`` when ``with_scores``.

    Raises:
        ParseError: malformed line (carries the 1-based line number).
        InvalidBoxError: a box with x2 <= x1 or y2 <= y1.
    """
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    pattern = _BOX5 if with_scores else _BOX4
    width = 5 if with_scores else 4
    records = []
    # split on "\n" only: paths may contain other Unicode line separators
    for lineno, line in enumerate(data.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        m = _RECORD.match(line)
        if m is None:
            raise ParseError(f"malformed record: {line!r}", lineno)
        path, body = m.groups()
        values = np.asarray(_parse_boxlist(body, pattern, lineno), dtype=np.float64).reshape(-1, width)
        boxes = values[:, :4]
        bad = (boxes[:, 2] <= boxes[:, 0]) | (boxes[:, 3] <= boxes[:, 1])
        if bad.any():
            raise InvalidBoxError(f"line {lineno}: box {boxes[bad][0].tolist()} has non-positive size")
        if with_scores:
            records.append((path, boxes, values[:, 4]))
        else:
            records.append((path, boxes))
    return records


def format_record(path, boxes, scores=None):
    if '"' in path or "\n" in path or "\r" in path:
        raise ValueError(f"path cannot contain quotes or line breaks: {path!r}")
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    parts = []
    for i, box in enumerate(boxes):
        vals = [float(v) for v in box]
        if scores is not None:
            vals.append(float(scores[i]))
        parts.append("(" + ", ".join(repr(v) for v in vals) + ")")
    return f'"{path}": ' + ", ".join(parts) + ";"


def serialize_annotations(records):
    """Inverse of :func:`parse_annotations`; accepts 2- or 3-tuples."""
    lines = [format_record(*rec) for rec in records]
    return ("\n".join(lines) + "\n") if lines else ""
