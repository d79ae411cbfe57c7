"""Finite-difference verification of the analytic anchor gradient.

The analytic gradient treats the kNN selection as a constant, so the
numerical oracle perturbs the vectors with the mask frozen at its value
for the unperturbed point. Instances whose similarities sit within a
small guard band of a selection boundary (or of the clamp at zero) are
resampled: the loss is only piecewise smooth there and a finite
difference would straddle the kink.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .adaptation import A2lpConfig, anchor_gradient, pipeline_loss
from .episodes import Episode
from .errors import ValidationError
from .evaluation import SyntheticTaskSpec, generate_synthetic
from .graph import _dense_affinity


@dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int
    size: int
    dim: int
    max_rel_err: float


@dataclass(frozen=True)
class GradCheckReport:
    trials: tuple[TrialResult, ...]
    tolerance: float

    @property
    def max_rel_err(self) -> float:
        return max(t.max_rel_err for t in self.trials)

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance

    @property
    def worst(self) -> TrialResult:
        return max(self.trials, key=lambda t: t.max_rel_err)


def finite_difference_gradient(
    vectors: np.ndarray,
    episode: Episode,
    cfg: A2lpConfig,
    mask: np.ndarray,
    step: float = 1e-4,
) -> np.ndarray:
    """Central differences of the pipeline loss over the anchor entries."""
    n_support = episode.support_count
    grad = np.zeros((n_support, vectors.shape[1]))
    for row in range(n_support):
        for col in range(vectors.shape[1]):
            bumped = vectors.copy()
            bumped[row, col] += step
            upper = pipeline_loss(bumped, episode, cfg, mask=mask)
            bumped[row, col] -= 2.0 * step
            lower = pipeline_loss(bumped, episode, cfg, mask=mask)
            grad[row, col] = (upper - lower) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Largest entry-wise relative disagreement.

    The denominator is floored at 1e-3 of the numeric gradient's largest
    magnitude, and never below 1e-8 (the noise floor of an h=1e-4 central
    difference), so entries that are tiny relative to the gradient's own
    scale are compared absolutely instead of against finite-difference
    noise. A saturated instance whose true gradient is ~0 everywhere
    therefore reports agreement rather than amplified roundoff.
    """
    floor = max(1e-8, 1e-3 * float(np.abs(numeric).max()))
    denominator = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float((np.abs(analytic - numeric) / denominator).max())


def _near_selection_boundary(vectors: np.ndarray, cfg: A2lpConfig, band: float = 1e-6) -> bool:
    """True when a cosine sits within ``band`` of the k-th rank cut or of 0."""
    _, mask, cosines, _, _ = _dense_affinity(vectors, cfg.graph)
    scores = cosines.copy()
    np.fill_diagonal(scores, -np.inf)
    k = cfg.graph.k
    sorted_scores = -np.sort(-scores, axis=0)
    rank_gap = sorted_scores[k - 1] - sorted_scores[k]
    if (rank_gap < band).any():
        return True
    selected = np.abs(cosines[mask])
    return bool((selected < band).any())


def gradient_check(
    trials: int,
    seed: int,
    cfg: A2lpConfig | None = None,
    size_range: tuple[int, int] = (15, 40),
    dim_range: tuple[int, int] = (4, 16),
    step: float = 1e-4,
    tolerance: float = 1e-3,
) -> GradCheckReport:
    """Compare analytic vs finite-difference gradients on random episodes.

    Instances are 5-way 1-shot synthetic tasks with T in ``size_range``
    (rounded to a multiple of 5) and feature dimension in ``dim_range``.
    """
    if trials < 1:
        raise ValidationError(f"trials must be positive, got {trials}")
    cfg = cfg or A2lpConfig()
    rng = np.random.default_rng(seed)
    results = []
    for trial in range(trials):
        for attempt in range(64):
            instance_seed = int(rng.integers(0, 2**31))
            total = int(rng.integers(size_range[0], size_range[1] + 1))
            n_way = 5
            m_query = max(1, round(total / n_way) - 1)
            dim = int(rng.integers(dim_range[0], dim_range[1] + 1))
            spec = SyntheticTaskSpec(
                n_way=n_way,
                k_shot=1,
                m_query=m_query,
                dim=dim,
                between_class_scale=1.0,
                within_class_scale=0.5,
                seed=instance_seed,
            )
            embeddings, episode = generate_synthetic(spec)
            vectors = embeddings.vectors / np.linalg.norm(embeddings.vectors, axis=1, keepdims=True)
            trial_cfg = replace(cfg, graph=replace(cfg.graph, k=min(cfg.graph.k, vectors.shape[0] - 1)))
            if not _near_selection_boundary(vectors, trial_cfg):
                break
        else:
            raise ValidationError("could not sample a smooth instance in 64 attempts")
        _, mask, _, _, _ = _dense_affinity(vectors, trial_cfg.graph)
        analytic, _ = anchor_gradient(vectors, episode, trial_cfg, mask=mask)
        numeric = finite_difference_gradient(vectors, episode, trial_cfg, mask, step=step)
        results.append(
            TrialResult(trial, instance_seed, vectors.shape[0], dim, relative_error(analytic, numeric))
        )
    return GradCheckReport(tuple(results), tolerance)
