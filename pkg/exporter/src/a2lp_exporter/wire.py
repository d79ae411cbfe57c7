"""Binary embedding format shared with the inference engine.

Layout (little-endian): magic ``A2LP`` (4 bytes), format version u32 = 1,
row count u64, dimension u64, labels-present flag u8, row count * dim
float32 row-major, then row count int64 labels when the flag is set.

This writer is standalone on purpose: the file format is the interface
between exporter and engine, so compatibility is proven against the
format, not against shared code.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"A2LP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQQB")


def write_embeddings(path: str | Path, vectors: np.ndarray, labels: np.ndarray | None) -> None:
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2 or vectors.shape[0] < 1 or vectors.shape[1] < 1:
        raise ValueError(f"vectors must be a nonempty 2-D array, got shape {vectors.shape}")
    if not np.isfinite(vectors).all():
        raise ValueError("refusing to write non-finite embeddings")
    flag = 0
    parts = [b""]
    if labels is not None:
        labels = np.ascontiguousarray(labels, dtype="<i8")
        if labels.shape != (vectors.shape[0],):
            raise ValueError("labels must have one entry per row")
        flag = 1
        parts = [labels.tobytes()]
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, vectors.shape[0], vectors.shape[1], flag)
    Path(path).write_bytes(header + vectors.tobytes(order="C") + b"".join(parts))


def read_embeddings(path: str | Path) -> tuple[np.ndarray, np.ndarray | None]:
    raw = Path(path).read_bytes()
    magic, version, count, dim, flag = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != FORMAT_VERSION:
        raise ValueError(f"not a supported embedding file: magic={magic!r} version={version}")
    offset = _HEADER.size
    vectors = np.frombuffer(raw, dtype="<f4", count=count * dim, offset=offset).reshape(count, dim)
    labels = None
    if flag:
        labels = np.frombuffer(raw, dtype="<i8", count=count, offset=offset + count * dim * 4)
    return vectors, labels
