"""Label propagation: build the label matrix, solve the linear system,
and read predictions off the manifold similarity matrix.

The propagation system (I - alpha*Wn) Z = Y is solved by one dense LU
factorization reused across all class columns; the same factorization is
reused by the adaptation module's adjoint solve. An iterative fixed-point
solver backs the direct one as an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .episodes import Episode
from .errors import ConvergenceError, ValidationError
from .graph import PropagationGraph

RESIDUAL_LIMIT = 1e-8


@dataclass(frozen=True)
class LabelMatrix:
    """T x N matrix: one-hot support rows on top, zero query rows below."""

    values: np.ndarray
    support_count: int


@dataclass(frozen=True)
class SimilarityMatrix:
    """T x N manifold class-similarity scores produced by propagation."""

    values: np.ndarray
    alpha: float
    iterations: int | None = None


def build_label_matrix(episode: Episode) -> LabelMatrix:
    """One-hot encode the support labels into the episode's label matrix."""
    n_support = episode.support_count
    values = np.zeros((episode.total, episode.n_way), dtype=np.float64)
    labels = episode.support_labels
    if labels.min(initial=0) < 0 or labels.max(initial=-1) >= episode.n_way:
        raise ValidationError("support labels must lie in [0, n_way)")
    present = np.unique(labels)
    if present.size != episode.n_way:
        missing = sorted(set(range(episode.n_way)) - set(present.tolist()))
        raise ValidationError(f"class {missing[0]} absent from the support set")
    values[np.arange(n_support), labels] = 1.0
    return LabelMatrix(values, n_support)


def _as_label_values(labels: LabelMatrix | np.ndarray) -> np.ndarray:
    return labels.values if isinstance(labels, LabelMatrix) else np.asarray(labels, float)


def factorize_system(normalized_adjacency: np.ndarray, alpha: float):
    """LU-factorize I - alpha*Wn (dense), for reuse across solves."""
    if not 0.0 <= alpha < 1.0:
        raise ValidationError(f"alpha must lie in [0, 1), got {alpha}")
    count = normalized_adjacency.shape[0]
    system = np.eye(count) - alpha * normalized_adjacency
    return scipy.linalg.lu_factor(system)


def solve_propagation(
    normalized_adjacency: np.ndarray, label_values: np.ndarray, alpha: float, factorization=None
) -> np.ndarray:
    """Solve (I - alpha*Wn) Z = Y and verify the residual."""
    if factorization is None:
        factorization = factorize_system(normalized_adjacency, alpha)
    solution = scipy.linalg.lu_solve(factorization, label_values)
    residual = np.abs(
        solution - alpha * (normalized_adjacency @ solution) - label_values
    ).max()
    if residual > RESIDUAL_LIMIT:
        raise ConvergenceError(
            f"propagation solve residual {residual:.3e} exceeds {RESIDUAL_LIMIT:.0e}",
            residual=residual,
        )
    return solution


def propagate(
    graph: PropagationGraph, labels: LabelMatrix | np.ndarray, alpha: float
) -> SimilarityMatrix:
    """Closed-form label propagation through the graph."""
    values = _as_label_values(labels)
    if values.shape[0] != graph.size:
        raise ValidationError(
            f"label matrix has {values.shape[0]} rows, graph has {graph.size}"
        )
    solution = solve_propagation(graph.dense(), values, alpha)
    return SimilarityMatrix(solution, alpha)


def propagate_iterative(
    graph: PropagationGraph,
    labels: LabelMatrix | np.ndarray,
    alpha: float,
    max_iters: int = 10_000,
    tol: float = 1e-10,
) -> SimilarityMatrix:
    """Fixed-point iteration Z <- alpha*Wn*Z + Y, starting from Z = Y.

    Converges for alpha < 1 because the iteration is a contraction; kept
    as an independent check on the closed-form solver.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValidationError(f"alpha must lie in [0, 1), got {alpha}")
    label_values = _as_label_values(labels)
    dense = graph.dense()
    current = label_values.copy()
    for iteration in range(1, max_iters + 1):
        updated = alpha * (dense @ current) + label_values
        step = np.abs(updated - current).max()
        current = updated
        if step < tol:
            return SimilarityMatrix(current, alpha, iterations=iteration)
    raise ConvergenceError(
        f"propagation iteration did not converge in {max_iters} steps "
        f"(last step {step:.3e})",
        residual=step,
    )


def predict(similarity: SimilarityMatrix | np.ndarray, support_count: int) -> np.ndarray:
    """Assign each query row to the class with the highest similarity.

    Ties go to the lowest class index (argmax convention).
    """
    values = similarity.values if isinstance(similarity, SimilarityMatrix) else similarity
    return np.argmax(values[support_count:], axis=1).astype(np.int64)
