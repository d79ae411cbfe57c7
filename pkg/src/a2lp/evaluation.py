"""Episode sampling, synthetic tasks, and the benchmark protocol.

The benchmark evaluates every requested method on the same sequence of
episodes (seed = base seed + episode index) and reports mean accuracy in
percent with a 95% confidence half-width of 1.96 * stderr over the
per-episode accuracies. Episode evaluation can run in worker processes;
results are keyed by episode index, so the report is identical for any
worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .adaptation import A2lpConfig, run_a2lp
from .baselines import imprint_and_finetune, plain_lp_classify, prototypical_classify
from .embeddings import EmbeddingSet, PreprocessMode, preprocess
from .episodes import Episode, episode_matrix, localize, validate_episode
from .errors import A2lpError, ValidationError

METHOD_NAMES = ("proto", "imprint", "lp", "a2lp")


@dataclass(frozen=True)
class SyntheticTaskSpec:
    """Gaussian mixture stand-in for a real novel split.

    Class means are spherical Gaussians scaled by ``between_class_scale``,
    members are spherical Gaussians around their mean scaled by
    ``within_class_scale``; everything is reproducible from ``seed``.
    """

    n_way: int = 5
    k_shot: int = 1
    m_query: int = 15
    dim: int = 64
    between_class_scale: float = 1.0
    within_class_scale: float = 0.35
    seed: int = 0

    def __post_init__(self):
        if self.between_class_scale < 0 or self.within_class_scale < 0:
            raise ValidationError("scales must be nonnegative")
        if min(self.n_way, self.k_shot, self.m_query, self.dim) < 1:
            raise ValidationError("n_way, k_shot, m_query and dim must be positive")


@dataclass(frozen=True)
class MethodResult:
    name: str
    mean_accuracy_pct: float
    ci95_pct: float
    per_episode_accuracy: np.ndarray


@dataclass(frozen=True)
class BenchmarkReport:
    results: tuple[MethodResult, ...]
    episodes: int
    config: dict
    wall_time_s: float
    warnings: tuple[str, ...] = ()


def sample_episode(
    embeddings: EmbeddingSet, n_way: int, k_shot: int, m_query: int, rng_seed: int
) -> Episode:
    """Draw one class-balanced episode from a labeled set, deterministically.

    Classes are sampled without replacement from those with at least
    k_shot + m_query members, then members without replacement; class ids
    are remapped to 0..n_way-1 in sampled order.
    """
    if embeddings.labels is None:
        raise ValidationError("episode sampling requires a labeled set")
    rng = np.random.default_rng(rng_seed)
    needed = k_shot + m_query
    classes, counts = np.unique(embeddings.labels, return_counts=True)
    eligible = classes[counts >= needed]
    if eligible.size < n_way:
        raise ValidationError(
            f"need {n_way} classes with at least {needed} members, "
            f"only {eligible.size} available"
        )
    chosen = rng.choice(eligible, size=n_way, replace=False)
    support_idx, support_lab, query_idx, query_lab = [], [], [], []
    for way, cls in enumerate(chosen):
        members = np.nonzero(embeddings.labels == cls)[0]
        picked = rng.choice(members, size=needed, replace=False)
        support_idx.append(picked[:k_shot])
        query_idx.append(picked[k_shot:])
        support_lab.append(np.full(k_shot, way))
        query_lab.append(np.full(m_query, way))
    episode = Episode(
        support_indices=np.concatenate(support_idx),
        support_labels=np.concatenate(support_lab),
        query_indices=np.concatenate(query_idx),
        query_labels=np.concatenate(query_lab),
        n_way=n_way,
        k_shot=k_shot,
        m_query=m_query,
    )
    validate_episode(episode, embeddings)
    return episode


def generate_synthetic(spec: SyntheticTaskSpec) -> tuple[EmbeddingSet, Episode]:
    """Materialize one synthetic episode (supports first, class-major)."""
    rng = np.random.default_rng(spec.seed)
    means = spec.between_class_scale * rng.standard_normal((spec.n_way, spec.dim))
    per_class = spec.k_shot + spec.m_query
    rows = np.empty((spec.n_way * per_class, spec.dim))
    for way in range(spec.n_way):
        noise = spec.within_class_scale * rng.standard_normal((per_class, spec.dim))
        rows[way * per_class : (way + 1) * per_class] = means[way] + noise

    support_idx, query_idx = [], []
    for way in range(spec.n_way):
        base = way * per_class
        support_idx.append(np.arange(base, base + spec.k_shot))
        query_idx.append(np.arange(base + spec.k_shot, base + per_class))
    labels = np.repeat(np.arange(spec.n_way), per_class)
    embeddings = EmbeddingSet(rows, labels, class_count=spec.n_way)
    episode = Episode(
        support_indices=np.concatenate(support_idx),
        support_labels=np.repeat(np.arange(spec.n_way), spec.k_shot),
        query_indices=np.concatenate(query_idx),
        query_labels=np.repeat(np.arange(spec.n_way), spec.m_query),
        n_way=spec.n_way,
        k_shot=spec.k_shot,
        m_query=spec.m_query,
    )
    validate_episode(episode, embeddings)
    return embeddings, episode


def score(predicted: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of exact label matches."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValidationError(f"length mismatch: {predicted.shape} vs {truth.shape}")
    return float((predicted == truth).mean())


@dataclass(frozen=True)
class _BenchContext:
    """Everything one worker needs to evaluate one episode."""

    source: EmbeddingSet | SyntheticTaskSpec
    methods: tuple[str, ...]
    cfg: A2lpConfig
    n_way: int
    k_shot: int
    m_query: int
    base_seed: int
    preprocess_scope: str
    imprint_steps: int
    imprint_lr: float
    imprint_scale: float


def _episode_view(embeddings: EmbeddingSet, episode: Episode) -> tuple[EmbeddingSet, Episode]:
    """Episode-local set (supports first) plus the re-indexed episode."""
    vectors = episode_matrix(embeddings, episode)
    labels = np.concatenate([episode.support_labels, episode.query_labels])
    return EmbeddingSet(vectors, labels, class_count=episode.n_way), localize(episode)


def _run_method(name: str, ctx: _BenchContext, local_set: EmbeddingSet, episode: Episode) -> np.ndarray:
    if name == "proto":
        return prototypical_classify(local_set, episode)
    if name == "imprint":
        return imprint_and_finetune(
            local_set, episode, steps=ctx.imprint_steps, lr=ctx.imprint_lr, scale=ctx.imprint_scale
        )
    if name == "lp":
        return plain_lp_classify(local_set, episode, ctx.cfg)
    if name == "a2lp":
        predictions, _ = run_a2lp(local_set, episode, ctx.cfg)
        return predictions
    raise ValidationError(f"unknown method {name!r}; expected one of {METHOD_NAMES}")


def _evaluate_episode(ctx: _BenchContext, index: int) -> tuple[int, dict[str, float]]:
    seed = ctx.base_seed + index
    try:
        if isinstance(ctx.source, SyntheticTaskSpec):
            full_set, episode = generate_synthetic(replace(ctx.source, seed=seed))
        else:
            episode = sample_episode(ctx.source, ctx.n_way, ctx.k_shot, ctx.m_query, seed)
            full_set = ctx.source
        local_set, local_episode = _episode_view(full_set, episode)
        if ctx.preprocess_scope == "episode":
            local_set = preprocess(local_set, ctx.cfg.preprocess)
        accuracies = {}
        for name in ctx.methods:
            predictions = _run_method(name, ctx, local_set, local_episode)
            accuracies[name] = score(predictions, local_episode.query_labels)
        return index, accuracies
    except A2lpError as exc:
        raise A2lpError(f"episode {index} (seed {seed}) failed: {exc}") from exc


def run_benchmark(
    source: EmbeddingSet | SyntheticTaskSpec,
    methods: list[str] | tuple[str, ...],
    episodes: int,
    base_seed: int = 0,
    cfg: A2lpConfig | None = None,
    n_way: int = 5,
    k_shot: int = 1,
    m_query: int = 15,
    jobs: int = 1,
    preprocess_scope: str = "episode",
    imprint_steps: int = 100,
    imprint_lr: float = 0.01,
    imprint_scale: float = 10.0,
) -> BenchmarkReport:
    """Paired evaluation of several methods over a shared episode stream."""
    if episodes < 1:
        raise ValidationError(f"episodes must be positive, got {episodes}")
    if preprocess_scope not in ("episode", "global"):
        raise ValidationError(f"unknown preprocess scope {preprocess_scope!r}")
    cfg = cfg or A2lpConfig()
    methods = tuple(methods)
    for name in methods:
        if name not in METHOD_NAMES:
            raise ValidationError(f"unknown method {name!r}; expected one of {METHOD_NAMES}")
    if isinstance(source, SyntheticTaskSpec):
        n_way, k_shot, m_query = source.n_way, source.k_shot, source.m_query
    elif preprocess_scope == "global":
        source = preprocess(source, cfg.preprocess)

    ctx = _BenchContext(
        source=source,
        methods=methods,
        cfg=cfg,
        n_way=n_way,
        k_shot=k_shot,
        m_query=m_query,
        base_seed=base_seed,
        preprocess_scope=preprocess_scope,
        imprint_steps=imprint_steps,
        imprint_lr=imprint_lr,
        imprint_scale=imprint_scale,
    )

    start = time.perf_counter()
    per_method = {name: np.empty(episodes) for name in methods}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunk = max(1, episodes // (jobs * 8))
            results = pool.map(_evaluate_episode, [ctx] * episodes, range(episodes), chunksize=chunk)
            for index, accuracies in results:
                for name, value in accuracies.items():
                    per_method[name][index] = value
    else:
        for index in range(episodes):
            _, accuracies = _evaluate_episode(ctx, index)
            for name, value in accuracies.items():
                per_method[name][index] = value
    wall_time = time.perf_counter() - start

    warnings = []
    if episodes == 1:
        warnings.append("single-episode sample: confidence interval degenerates to 0")
    results = []
    for name in methods:
        accuracy = per_method[name]
        mean_pct = float(accuracy.mean() * 100.0)
        if episodes > 1:
            ci = float(1.96 * accuracy.std(ddof=1) / np.sqrt(episodes) * 100.0)
        else:
            ci = 0.0
        results.append(MethodResult(name, mean_pct, ci, accuracy))

    config = {
        "episodes": episodes,
        "base_seed": base_seed,
        "n_way": n_way,
        "k_shot": k_shot,
        "m_query": m_query,
        "methods": ",".join(methods),
        "alpha": cfg.alpha,
        "gamma": cfg.graph.gamma,
        "k": cfg.graph.k,
        "tau": cfg.tau,
        "steps": cfg.steps,
        "learning_rate": cfg.learning_rate,
        "optimizer": cfg.optimizer,
        "final_forward_pass": cfg.final_forward_pass,
        "preprocess": cfg.preprocess.value,
        "preprocess_scope": preprocess_scope,
        "imprint_steps": imprint_steps,
        "imprint_lr": imprint_lr,
        "imprint_scale": imprint_scale,
    }
    if isinstance(source, SyntheticTaskSpec):
        config.update(
            source="synthetic",
            dim=source.dim,
            between_class_scale=source.between_class_scale,
            within_class_scale=source.within_class_scale,
        )
    else:
        config.update(source="embeddings", set_size=source.count, dim=source.dim)

    return BenchmarkReport(tuple(results), episodes, config, wall_time, tuple(warnings))


def render_report(report: BenchmarkReport) -> str:
    """Deterministic text rendering: human table plus key-value lines.

    Wall time is deliberately left out so reports are byte-identical
    across worker counts; it lives on the report object.
    """
    lines = ["# benchmark report"]
    for key in sorted(report.config):
        lines.append(f"# {key}={report.config[key]}")
    for warning in report.warnings:
        lines.append(f"# warning: {warning}")
    lines.append("")
    lines.append(f"{'method':<10}{'accuracy':>10}{'ci95':>8}")
    for result in report.results:
        lines.append(
            f"{result.name:<10}{result.mean_accuracy_pct:>10.2f}{result.ci95_pct:>8.2f}"
        )
    lines.append("")
    for result in report.results:
        lines.append(
            f"method={result.name} mean_accuracy_pct={result.mean_accuracy_pct:.4f} "
            f"ci95_pct={result.ci95_pct:.4f} episodes={report.episodes}"
        )
    return "\n".join(lines) + "\n"
