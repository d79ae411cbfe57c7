"""Loading, validation, preprocessing and persistence of embedding sets.

Two on-disk formats are supported. The binary format is the canonical
interchange format (shared with the feature exporter); CSV exists for
hand-written fixtures.

Binary layout (little-endian):
    magic ``A2LP`` (4 bytes), format version u32 = 1, T u64, d u64,
    labels-present flag u8, T*d float32 row-major, then T int64 labels
    if the flag is set.

CSV layout: one row per line of comma-separated decimal floats, with an
optional final column ``label:<int>``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"A2LP"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIQQB")


class PreprocessMode(str, Enum):
    """Feature preprocessing applied before graph construction."""

    NONE = "none"
    L2 = "l2"
    PLC = "plc"


@dataclass(frozen=True)
class EmbeddingSet:
    """A T x d matrix of feature vectors with optional integer class ids.

    Vectors are held as float64 and frozen (read-only) after construction,
    so a set can be shared across concurrent episode evaluations.
    """

    vectors: np.ndarray
    labels: np.ndarray | None = None
    class_count: int | None = None

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ValidationError(f"vectors must be 2-D, got shape {vectors.shape}")
        if vectors.shape[0] < 1 or vectors.shape[1] < 1:
            raise ValidationError(f"empty set: shape {vectors.shape}")
        if not np.isfinite(vectors).all():
            i, j = np.argwhere(~np.isfinite(vectors))[0]
            raise ValidationError(f"non-finite value at row {i}, col {j}")
        vectors = vectors.copy()
        vectors.flags.writeable = False
        object.__setattr__(self, "vectors", vectors)

        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64).copy()
            if labels.shape != (vectors.shape[0],):
                raise ValidationError(
                    f"labels shape {labels.shape} does not match T={vectors.shape[0]}"
                )
            count = self.class_count
            if count is None:
                count = int(labels.max()) + 1
                object.__setattr__(self, "class_count", count)
            if labels.min() < 0 or labels.max() >= count:
                raise ValidationError(
                    f"labels must lie in [0, {count}), got range "
                    f"[{labels.min()}, {labels.max()}]"
                )
            labels.flags.writeable = False
            object.__setattr__(self, "labels", labels)

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _l2_rows(matrix: np.ndarray) -> np.ndarray:
    """Row-wise l2 normalization; rejects rows with norm below 1e-12."""
    norms = np.linalg.norm(matrix, axis=1)
    bad = np.nonzero(norms <= 1e-12)[0]
    if bad.size:
        raise ValidationError(f"zero vector not normalizable (row {bad[0]})")
    return matrix / norms[:, None]


def l2_normalize(embeddings: EmbeddingSet) -> EmbeddingSet:
    """Scale every row to unit Euclidean norm."""
    return EmbeddingSet(
        _l2_rows(embeddings.vectors), embeddings.labels, embeddings.class_count
    )


def plc_preprocess(embeddings: EmbeddingSet) -> EmbeddingSet:
    """Power transform, l2-normalize, then center the whole set.

    The order is element-wise square root, row-wise l2 normalization, and
    finally subtraction of the mean row of the normalized set. Centering
    comes last, so output rows are generally not unit-norm. Requires
    nonnegative features (as produced by ReLU networks).
    """
    vectors = embeddings.vectors
    if (vectors < 0).any():
        i, j = np.argwhere(vectors < 0)[0]
        raise ValidationError(
            f"PLC requires nonnegative features (negative entry at row {i}, col {j})"
        )
    transformed = _l2_rows(np.sqrt(vectors))
    centered = transformed - transformed.mean(axis=0)
    return EmbeddingSet(centered, embeddings.labels, embeddings.class_count)


def preprocess(embeddings: EmbeddingSet, mode: PreprocessMode | str) -> EmbeddingSet:
    """Apply the selected preprocessing mode to a set."""
    mode = PreprocessMode(mode)
    if mode is PreprocessMode.NONE:
        return embeddings
    if mode is PreprocessMode.L2:
        return l2_normalize(embeddings)
    return plc_preprocess(embeddings)


def _validate_finite(matrix: np.ndarray) -> None:
    if not np.isfinite(matrix).all():
        i, j = np.argwhere(~np.isfinite(matrix))[0]
        raise FormatError(f"non-finite value at row {i}, col {j}")


def _load_binary(path: Path) -> EmbeddingSet:
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"malformed header: file shorter than {_HEADER.size} bytes")
    magic, version, count, dim, flag = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"malformed header: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    if count == 0 or dim == 0:
        raise FormatError("empty set")
    if flag not in (0, 1):
        raise FormatError(f"malformed header: labels flag {flag}")
    expected = _HEADER.size + count * dim * 4 + (count * 8 if flag else 0)
    if len(raw) != expected:
        raise FormatError(
            "dimension mismatch between header and payload: "
            f"expected {expected} bytes, file has {len(raw)}"
        )
    offset = _HEADER.size
    vectors = (
        np.frombuffer(raw, dtype="<f4", count=count * dim, offset=offset)
        .astype(np.float64)
        .reshape(count, dim)
    )
    _validate_finite(vectors)
    labels = None
    if flag:
        offset += count * dim * 4
        labels = np.frombuffer(raw, dtype="<i8", count=count, offset=offset)
    return EmbeddingSet(vectors, labels)


def _load_csv(path: Path) -> EmbeddingSet:
    rows: list[list[float]] = []
    labels: list[int] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            has_label = fields[-1].startswith("label:")
            if has_label:
                try:
                    labels.append(int(fields[-1][len("label:"):]))
                except ValueError:
                    raise FormatError(f"bad label field {fields[-1]!r} on line {lineno + 1}")
                fields = fields[:-1]
            elif labels:
                raise FormatError(f"missing label column on line {lineno + 1}")
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise FormatError(f"unparseable value on line {lineno + 1}: {exc}")
    if not rows:
        raise FormatError("empty set")
    dim = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != dim:
            raise FormatError(
                f"dimension mismatch between header and payload: row {i} has "
                f"{len(row)} columns, expected {dim}"
            )
    if labels and len(labels) != len(rows):
        raise FormatError("label column must be present on every row or none")
    vectors = np.array(rows, dtype=np.float64)
    _validate_finite(vectors)
    return EmbeddingSet(vectors, np.array(labels, dtype=np.int64) if labels else None)


def load_embeddings(path: str | Path, format: str = "binary") -> EmbeddingSet:
    """Load an embedding set from ``path`` in the declared format."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"no such file: {path}")
    if format == "binary":
        return _load_binary(path)
    if format == "csv":
        return _load_csv(path)
    raise ValueError(f"unknown format {format!r}")


def save_embeddings(embeddings: EmbeddingSet, path: str | Path, format: str = "binary") -> None:
    """Write an embedding set to ``path``.

    The binary payload is float32, so a binary round trip is bit-exact for
    float32-representable values (which includes everything read back from
    a binary file). CSV round trips are exact to 1e-6 per entry.
    """
    path = Path(path)
    if format == "binary":
        flag = 1 if embeddings.labels is not None else 0
        parts = [
            _HEADER.pack(MAGIC, FORMAT_VERSION, embeddings.count, embeddings.dim, flag)
        ]
        parts.append(embeddings.vectors.astype("<f4").tobytes(order="C"))
        if flag:
            parts.append(embeddings.labels.astype("<i8").tobytes())
        path.write_bytes(b"".join(parts))
        return
    if format == "csv":
        with open(path, "w", encoding="utf-8") as handle:
            for i in range(embeddings.count):
                fields = ["%.9g" % value for value in embeddings.vectors[i]]
                if embeddings.labels is not None:
                    fields.append("label:%d" % embeddings.labels[i])
                handle.write(",".join(fields) + "\n")
        return
    raise ValueError(f"unknown format {format!r}")
