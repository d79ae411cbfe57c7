"""k-nearest-neighbour affinity graph and its symmetric normalization.

The affinity of an ordered pair (i, j) is the nonnegative cosine
similarity raised to the power gamma, kept only when i != j and v_i is
among the k nearest neighbours of v_j; so columns carry the neighbour
selection. The adjacency is then symmetrized and rescaled by inverse
square-root degrees, which bounds its spectrum by 1 and makes the
propagation system well-posed.

Everything is computed densely (episodes have T ~ 80 points) and the
results are stored sparsely. The dense helpers are shared with the
anchor-adaptation backward pass so both paths produce bit-identical
values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import GraphError, ValidationError


@dataclass(frozen=True)
class GraphConfig:
    """Neighbour count and similarity exponent for graph construction."""

    k: int = 20
    gamma: float = 3.0

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be positive, got {self.k}")
        if not self.gamma > 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class PropagationGraph:
    """Symmetrically normalized adjacency with its kNN mask and degrees."""

    normalized_adjacency: sp.csr_matrix
    knn_mask: sp.csr_matrix
    degree: np.ndarray

    @property
    def size(self) -> int:
        return self.normalized_adjacency.shape[0]

    def dense(self) -> np.ndarray:
        return self.normalized_adjacency.toarray()


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between two vectors, in [-1, 1].

    Uses the full quotient form: adapted anchors drift off the unit
    sphere, so a plain dot product would be wrong.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu <= 1e-12 or nv <= 1e-12:
        raise ValidationError("cosine similarity undefined for zero-norm vector")
    return float(u @ v / (nu * nv))


def _unit_rows(vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row norms and row-normalized copy; rejects zero rows."""
    norms = np.linalg.norm(vectors, axis=1)
    bad = np.nonzero(norms <= 1e-12)[0]
    if bad.size:
        raise ValidationError(f"zero vector not normalizable (row {bad[0]})")
    return norms, vectors / norms[:, None]


def _knn_selection(similarities: np.ndarray, k: int) -> np.ndarray:
    """Boolean mask: entry (i, j) is True iff v_i is one of the k nearest
    non-self neighbours of v_j. Ties at the k-th rank go to the lower row
    index (stable sort on descending similarity)."""
    count = similarities.shape[0]
    scores = similarities.copy()
    np.fill_diagonal(scores, -np.inf)
    order = np.argsort(-scores, axis=0, kind="stable")
    mask = np.zeros((count, count), dtype=bool)
    mask[order[:k, :], np.arange(count)[None, :]] = True
    return mask


def _dense_affinity(
    vectors: np.ndarray, cfg: GraphConfig, mask: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Dense affinity pass. Returns (A, mask, C, norms, unit_rows).

    ``mask`` may be supplied to reuse a previously computed neighbour
    selection (the adaptation loop's frozen-mask treatment)."""
    vectors = np.asarray(vectors, dtype=np.float64)
    count = vectors.shape[0]
    if count < 2:
        raise GraphError(f"need at least 2 vectors to build a graph, got {count}")
    if cfg.k > count - 1:
        raise GraphError(f"k exceeds candidate count (k={cfg.k}, T={count})")
    norms, unit = _unit_rows(vectors)
    similarities = unit @ unit.T
    if mask is None:
        mask = _knn_selection(similarities, cfg.k)
    clamped = np.maximum(similarities, 0.0)
    affinity = np.where(mask, clamped**cfg.gamma, 0.0)
    return affinity, mask, similarities, norms, unit


def _dense_normalize(affinity: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Symmetrize and degree-normalize a dense affinity matrix.

    Returns (normalized W, degrees, inverse-sqrt-degree outer product).
    The evaluation order keeps the result exactly symmetric: (A + A^T)/2
    is entry-wise symmetric, the outer product s s^T is entry-wise
    symmetric, and their Hadamard product preserves that.
    """
    adjacency = (affinity + affinity.T) / 2.0
    degree = adjacency.sum(axis=1)
    isolated = np.nonzero(degree <= 1e-12)[0]
    if isolated.size:
        raise GraphError(f"isolated vertex {isolated[0]}")
    inv_sqrt = 1.0 / np.sqrt(degree)
    outer = inv_sqrt[:, None] * inv_sqrt[None, :]
    return adjacency * outer, degree, outer


def build_affinity(vectors: np.ndarray, cfg: GraphConfig) -> sp.csr_matrix:
    """Sparse directed affinity matrix of the k-nearest-neighbour graph.

    Stored entries are exactly the selected (i, j) pairs; a selected pair
    with nonpositive cosine is kept as an explicit zero so the stored
    sparsity pattern records the selection (k entries per column).
    """
    affinity, mask, _, _, _ = _dense_affinity(vectors, cfg)
    rows, cols = np.nonzero(mask)
    return sp.csr_matrix(
        (affinity[rows, cols], (rows, cols)), shape=affinity.shape
    )


def normalize_graph(affinity: sp.spmatrix | np.ndarray) -> PropagationGraph:
    """Symmetrize and normalize an affinity matrix into a PropagationGraph.

    Accepts the sparse output of :func:`build_affinity` (whose stored
    pattern becomes the kNN mask) or a dense nonnegative matrix with zero
    diagonal.
    """
    if sp.issparse(affinity):
        affinity = affinity.tocsr()
        dense = affinity.toarray()
        mask = sp.csr_matrix(
            (np.ones(affinity.nnz, dtype=bool), affinity.indices, affinity.indptr),
            shape=affinity.shape,
        )
    else:
        dense = np.asarray(affinity, dtype=np.float64)
        mask = sp.csr_matrix(dense != 0)
    if dense.shape[0] != dense.shape[1]:
        raise GraphError(f"affinity must be square, got {dense.shape}")
    if (dense < 0).any():
        raise GraphError("affinity entries must be nonnegative")
    if np.diagonal(dense).any():
        raise GraphError("affinity diagonal must be zero")
    normalized, degree, _ = _dense_normalize(dense)
    return PropagationGraph(
        normalized_adjacency=sp.csr_matrix(normalized),
        knn_mask=mask.tocsr(),
        degree=degree,
    )


def build_graph(vectors: np.ndarray, cfg: GraphConfig) -> PropagationGraph:
    """Affinity construction followed by normalization, in one call."""
    return normalize_graph(build_affinity(vectors, cfg))
