"""Episode index structure: which rows of a set form one N-way K-shot task."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingSet
from .errors import ValidationError


@dataclass(frozen=True)
class Episode:
    """Index view of one N-way K-shot task over an embedding set.

    Row-ordering convention used throughout the pipeline: the episode
    matrix stacks the support rows first (class-major, indices
    0..n_support-1) followed by the query rows. Labels are class ids
    remapped to 0..n_way-1. ``query_labels`` may be None for pure
    inference tasks where the ground truth is unknown.
    """

    support_indices: np.ndarray
    support_labels: np.ndarray
    query_indices: np.ndarray
    query_labels: np.ndarray | None
    n_way: int
    k_shot: int
    m_query: int

    def __post_init__(self):
        for name in ("support_indices", "support_labels", "query_indices"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        if self.query_labels is not None:
            object.__setattr__(self, "query_labels", np.asarray(self.query_labels, dtype=np.int64))
        if self.support_indices.shape != self.support_labels.shape:
            raise ValidationError("support indices and labels must have equal length")
        if self.query_labels is not None and self.query_labels.shape != self.query_indices.shape:
            raise ValidationError("query indices and labels must have equal length")

    @property
    def support_count(self) -> int:
        return int(self.support_indices.size)

    @property
    def query_count(self) -> int:
        return int(self.query_indices.size)

    @property
    def total(self) -> int:
        return self.support_count + self.query_count


def validate_episode(episode: Episode, embeddings: EmbeddingSet | None = None) -> None:
    """Check the full episode invariants.

    Enforces N_S = N*K with exactly K support rows per class, disjoint
    support/query indices, and (when query labels are present) exactly M
    query rows per class. When a set is given, indices must be in range.
    """
    n, k, m = episode.n_way, episode.k_shot, episode.m_query
    if n < 2:
        raise ValidationError(f"n_way must be at least 2, got {n}")
    if episode.support_count != n * k:
        raise ValidationError(
            f"support size {episode.support_count} != n_way*k_shot = {n * k}"
        )
    counts = np.bincount(episode.support_labels, minlength=n)
    if episode.support_labels.min(initial=0) < 0 or episode.support_labels.max(initial=0) >= n:
        raise ValidationError("support labels must lie in [0, n_way)")
    if not (counts == k).all():
        raise ValidationError(f"support must contain exactly {k} rows per class, got {counts}")
    if episode.query_labels is not None:
        if episode.query_count != n * m:
            raise ValidationError(
                f"query size {episode.query_count} != n_way*m_query = {n * m}"
            )
        qcounts = np.bincount(episode.query_labels, minlength=n)
        if episode.query_labels.min(initial=0) < 0 or episode.query_labels.max(initial=0) >= n:
            raise ValidationError("query labels must lie in [0, n_way)")
        if not (qcounts == m).all():
            raise ValidationError(f"queries must contain exactly {m} rows per class, got {qcounts}")
    all_indices = np.concatenate([episode.support_indices, episode.query_indices])
    if np.unique(all_indices).size != all_indices.size:
        raise ValidationError("support and query indices must be disjoint")
    if embeddings is not None:
        if all_indices.min() < 0 or all_indices.max() >= embeddings.count:
            raise ValidationError("episode indices out of range for the given set")


def episode_matrix(embeddings: EmbeddingSet, episode: Episode) -> np.ndarray:
    """Gather the episode's vectors: support rows first, then query rows."""
    vectors = embeddings.vectors
    return np.concatenate(
        [vectors[episode.support_indices], vectors[episode.query_indices]], axis=0
    )


def localize(episode: Episode) -> Episode:
    """Re-index an episode onto its own matrix (rows 0..T-1, supports first)."""
    return Episode(
        support_indices=np.arange(episode.support_count, dtype=np.int64),
        support_labels=episode.support_labels,
        query_indices=np.arange(
            episode.support_count, episode.total, dtype=np.int64
        ),
        query_labels=episode.query_labels,
        n_way=episode.n_way,
        k_shot=episode.k_shot,
        m_query=episode.m_query,
    )
