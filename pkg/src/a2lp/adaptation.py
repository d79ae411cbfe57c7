"""Gradient-based adaptation of the labeled support anchors.

Each step rebuilds the kNN graph on the current vectors, propagates the
support labels, scores the anchors with a tempered softmax and
cross-entropy, and moves the anchor rows along the exact gradient of
that loss. The gradient is computed by reverse-mode differentiation of
the entire forward pipeline; the kNN selection (and its tie-breaks) is
held fixed within a step, which is the standard piecewise-smooth
treatment of the non-differentiable neighbour choice.

Backward chain, in order:
  1. softmax + cross-entropy  ->  dL/dZ = tau * (P - Y) on anchor rows
  2. adjoint of the linear solve: (I - a*Wn) U = dL/dZ (the system is
     symmetric, so the forward LU factorization is reused), then
     dL/dWn = a * U Z^T
  3. degree normalization Wn = D^-1/2 W D^-1/2, including the dependence
     of the degrees on W
  4. symmetrization W = (A + A^T)/2
  5. clamped power [cos]_+^gamma with subgradient 0 at cos <= 0
  6. quotient-rule cosine gradient, accumulated into anchor rows only
     (query rows stay fixed but still transmit gradient through shared
     edges)
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .embeddings import EmbeddingSet, PreprocessMode
from .episodes import Episode, episode_matrix
from .errors import ValidationError
from .graph import GraphConfig, _dense_affinity, _dense_normalize, build_graph
from .propagation import (
    LabelMatrix,
    build_label_matrix,
    factorize_system,
    predict,
    propagate,
    solve_propagation,
)

LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class A2lpConfig:
    """All hyperparameters of the adaptive-anchor pipeline.

    Defaults follow the published operating point: gamma=3, tau=15,
    alpha=0.8, k=20, 1000 steps of Adam at learning rate 1e-4, l2
    preprocessing. Adam moment decay rates and epsilon are the
    conventional (0.9, 0.999, 1e-8).
    """

    graph: GraphConfig = field(default_factory=GraphConfig)
    alpha: float = 0.8
    tau: float = 15.0
    steps: int = 1000
    learning_rate: float = 1e-4
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    final_forward_pass: bool = True
    preprocess: PreprocessMode = PreprocessMode.L2

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not self.tau > 0:
            raise ValidationError(f"tau must be positive, got {self.tau}")
        if self.steps < 0:
            raise ValidationError(f"steps must be nonnegative, got {self.steps}")
        if not self.learning_rate > 0:
            raise ValidationError(f"learning rate must be positive, got {self.learning_rate}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")
        object.__setattr__(self, "preprocess", PreprocessMode(self.preprocess))


@dataclass
class AdamState:
    """Adam moment estimates for the anchor block."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros(cls, shape: tuple[int, int]) -> "AdamState":
        return cls(np.zeros(shape), np.zeros(shape), 0)


@dataclass(frozen=True)
class AnchorProbabilities:
    """Per-anchor class distribution P (rows sum to 1)."""

    values: np.ndarray


class StepRecord(NamedTuple):
    step: int
    loss: float
    anchor_displacement: float
    query_accuracy: float | None


@dataclass
class Diagnostics:
    """Per-step trace of an adaptation run plus the final state."""

    records: list[StepRecord]
    final_loss: float
    final_vectors: np.ndarray

    @property
    def initial_loss(self) -> float:
        return self.records[0].loss if self.records else self.final_loss


def anchor_softmax(
    similarity, support_count: int, tau: float
) -> AnchorProbabilities:
    """Row-wise softmax of tau*Z over the anchor rows, overflow-safe."""
    if not tau > 0:
        raise ValidationError(f"tau must be positive, got {tau}")
    values = similarity.values if hasattr(similarity, "values") else np.asarray(similarity)
    logits = tau * values[:support_count]
    logits = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    return AnchorProbabilities(exp / exp.sum(axis=1, keepdims=True))


def anchor_cross_entropy(
    probabilities: AnchorProbabilities, labels: LabelMatrix | np.ndarray
) -> float:
    """Summed (not averaged) cross-entropy of the anchors against their labels."""
    probs = probabilities.values
    target = labels.values[: probs.shape[0]] if isinstance(labels, LabelMatrix) else labels
    if target.shape != probs.shape:
        raise ValidationError(
            f"label block {target.shape} does not match probabilities {probs.shape}"
        )
    return float(-(target * np.log(np.maximum(probs, LOG_FLOOR))).sum())


def adam_step(
    anchors: np.ndarray, grad: np.ndarray, state: AdamState, cfg: A2lpConfig
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update on the anchor block."""
    if anchors.shape != grad.shape:
        raise ValidationError(f"gradient shape {grad.shape} != anchors {anchors.shape}")
    count = state.step_count + 1
    first = cfg.adam_beta1 * state.first_moment + (1.0 - cfg.adam_beta1) * grad
    second = cfg.adam_beta2 * state.second_moment + (1.0 - cfg.adam_beta2) * grad**2
    first_hat = first / (1.0 - cfg.adam_beta1**count)
    second_hat = second / (1.0 - cfg.adam_beta2**count)
    updated = anchors - cfg.learning_rate * first_hat / (np.sqrt(second_hat) + cfg.adam_epsilon)
    return updated, AdamState(first, second, count)


class _Forward(NamedTuple):
    loss: float
    similarity_solution: np.ndarray  # Z
    probabilities: np.ndarray  # P, anchor rows
    label_values: np.ndarray  # Y
    mask: np.ndarray
    cosines: np.ndarray
    norms: np.ndarray
    unit: np.ndarray
    affinity: np.ndarray
    degree: np.ndarray
    degree_outer: np.ndarray
    normalized: np.ndarray
    factorization: tuple


def _forward(
    vectors: np.ndarray, episode: Episode, cfg: A2lpConfig, mask: np.ndarray | None = None
) -> _Forward:
    """Full forward pass, keeping every intermediate the backward needs."""
    affinity, mask, cosines, norms, unit = _dense_affinity(vectors, cfg.graph, mask=mask)
    normalized, degree, outer = _dense_normalize(affinity)
    label_values = build_label_matrix(episode).values
    factorization = factorize_system(normalized, cfg.alpha)
    solution = solve_propagation(normalized, label_values, cfg.alpha, factorization)
    probs = anchor_softmax(solution, episode.support_count, cfg.tau).values
    loss = anchor_cross_entropy(
        AnchorProbabilities(probs), label_values[: episode.support_count]
    )
    return _Forward(
        loss, solution, probs, label_values, mask, cosines, norms, unit,
        affinity, degree, outer, normalized, factorization,
    )


def pipeline_loss(
    vectors: np.ndarray, episode: Episode, cfg: A2lpConfig, mask: np.ndarray | None = None
) -> float:
    """Anchor cross-entropy of the full pipeline at the given vectors.

    Passing ``mask`` freezes the neighbour selection, which is what the
    finite-difference oracle needs.
    """
    return _forward(vectors, episode, cfg, mask=mask).loss


def _backward(state: _Forward, episode: Episode, cfg: A2lpConfig) -> np.ndarray:
    """Exact gradient of the loss w.r.t. the anchor rows, mask held fixed."""
    n_support = episode.support_count
    gamma = cfg.graph.gamma

    # softmax + cross-entropy
    grad_solution = np.zeros_like(state.similarity_solution)
    grad_solution[:n_support] = cfg.tau * (
        state.probabilities - state.label_values[:n_support]
    )

    # adjoint of the linear solve (system is symmetric; reuse the LU factors)
    adjoint = scipy.linalg.lu_solve(state.factorization, grad_solution)
    grad_normalized = cfg.alpha * (adjoint @ state.similarity_solution.T)

    # degree normalization, including d(degree)/d(W)
    hadamard = grad_normalized * state.normalized
    degree_sums = hadamard.sum(axis=1) + hadamard.sum(axis=0)
    grad_degree = -degree_sums / (2.0 * state.degree)
    grad_adjacency = grad_normalized * state.degree_outer + grad_degree[:, None]

    # symmetrization W = (A + A^T)/2
    grad_affinity = 0.5 * (grad_adjacency + grad_adjacency.T)

    # clamped power, selection mask fixed; subgradient 0 at cos <= 0
    active = state.mask & (state.cosines > 0)
    slope = np.zeros_like(state.cosines)
    slope[active] = gamma * state.cosines[active] ** (gamma - 1.0)
    grad_cosines = grad_affinity * slope

    # quotient-rule cosine gradient, folded over the symmetric pair (i, j)
    paired = grad_cosines + grad_cosines.T
    projection = (paired * state.cosines).sum(axis=1)
    grad_vectors = (paired @ state.unit - projection[:, None] * state.unit) / state.norms[:, None]
    return grad_vectors[:n_support]


def anchor_gradient(
    vectors: np.ndarray, episode: Episode, cfg: A2lpConfig, mask: np.ndarray | None = None
) -> tuple[np.ndarray, float]:
    """Analytic dL/d(anchors) through graph, solve, softmax and loss.

    Returns the N_S x d gradient block and the scalar loss at ``vectors``.
    The derivative of the clamped power is used as written, so it is
    valid for gamma >= 1 (the published setting is gamma = 3).
    """
    state = _forward(vectors, episode, cfg, mask=mask)
    return _backward(state, episode, cfg), state.loss


def _sgd_step(anchors, grad, cfg):
    return anchors - cfg.learning_rate * grad


def run_a2lp(
    embeddings: EmbeddingSet,
    episode: Episode,
    cfg: A2lpConfig,
    track_accuracy: bool = False,
) -> tuple[np.ndarray, Diagnostics]:
    """Adaptive anchor label propagation on one episode.

    Expects preprocessing to have been applied to ``embeddings`` already
    (normalization happens once, before the loop; anchors are not
    re-normalized as they move). Runs ``cfg.steps`` iterations of
    {rebuild graph, propagate, anchor loss, gradient, optimizer step on
    the anchor rows}, then predicts. With the default
    ``final_forward_pass=True`` the prediction uses one extra propagation
    through the fully updated anchors; setting it False predicts from
    the similarity matrix of the last step's forward pass, and
    ``steps=0`` reduces to plain label propagation either way.
    """
    vectors = episode_matrix(embeddings, episode)
    n_support = episode.support_count
    initial_anchors = vectors[:n_support].copy()
    state = AdamState.zeros(vectors[:n_support].shape)
    records: list[StepRecord] = []
    last_solution = None

    for step in range(cfg.steps):
        forward = _forward(vectors, episode, cfg)
        grad = _backward(forward, episode, cfg)
        if cfg.optimizer == "adam":
            vectors[:n_support], state = adam_step(vectors[:n_support], grad, state, cfg)
        else:
            vectors[:n_support] = _sgd_step(vectors[:n_support], grad, cfg)
        accuracy = None
        if track_accuracy and episode.query_labels is not None:
            step_predictions = predict(forward.similarity_solution, n_support)
            accuracy = float((step_predictions == episode.query_labels).mean())
        records.append(
            StepRecord(
                step=step,
                loss=forward.loss,
                anchor_displacement=float(
                    np.linalg.norm(vectors[:n_support] - initial_anchors)
                ),
                query_accuracy=accuracy,
            )
        )
        last_solution = forward.similarity_solution

    if cfg.steps == 0 or cfg.final_forward_pass:
        graph = build_graph(vectors, cfg.graph)
        label_matrix = build_label_matrix(episode)
        similarity = propagate(graph, label_matrix, cfg.alpha)
        last_solution = similarity.values
        final_probs = anchor_softmax(similarity, n_support, cfg.tau)
        final_loss = anchor_cross_entropy(final_probs, label_matrix)
    else:
        final_loss = records[-1].loss

    predictions = predict(last_solution, n_support)
    diagnostics = Diagnostics(records, final_loss, vectors)
    return predictions, diagnostics


def config_with(cfg: A2lpConfig, **overrides) -> A2lpConfig:
    """Functional update helper for configs (dataclasses.replace wrapper)."""
    return replace(cfg, **overrides)
