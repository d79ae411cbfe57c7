"""Command-line surface: bench, solve, gradcheck, synth.

Exit codes: 0 success, 1 usage or data error, 2 verification failure.
All structured output is line-oriented UTF-8 on stdout; timing and trace
diagnostics go to stderr so stdout stays deterministic.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from .adaptation import A2lpConfig, anchor_gradient, run_a2lp
from .embeddings import (
    EmbeddingSet,
    PreprocessMode,
    load_embeddings,
    preprocess,
    save_embeddings,
)
from .episodes import Episode, episode_matrix, localize
from .errors import A2lpError
from .evaluation import (
    METHOD_NAMES,
    SyntheticTaskSpec,
    generate_synthetic,
    render_report,
    run_benchmark,
)
from .gradcheck import gradient_check
from .graph import GraphConfig, build_affinity, normalize_graph


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("pipeline hyperparameters")
    group.add_argument("--alpha", type=float, default=0.8, help="propagation strength in [0,1)")
    group.add_argument("--gamma", type=float, default=3.0, help="similarity exponent")
    group.add_argument("--tau", type=float, default=15.0, help="anchor softmax scale")
    group.add_argument("--k", type=int, default=20, help="neighbours per node")
    group.add_argument("--steps", type=int, default=1000, help="anchor adaptation steps")
    group.add_argument("--lr", type=float, default=1e-4, help="anchor learning rate")
    group.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    group.add_argument(
        "--no-final-forward",
        action="store_true",
        help="predict from the last in-loop propagation instead of re-propagating "
        "through the final anchors",
    )
    group.add_argument(
        "--preprocess", choices=[m.value for m in PreprocessMode], default="l2"
    )


def _config_from(args) -> A2lpConfig:
    return A2lpConfig(
        graph=GraphConfig(k=args.k, gamma=args.gamma),
        alpha=args.alpha,
        tau=args.tau,
        steps=args.steps,
        learning_rate=args.lr,
        optimizer=args.optimizer,
        final_forward_pass=not args.no_final_forward,
        preprocess=PreprocessMode(args.preprocess),
    )


def _synthetic_spec(args) -> SyntheticTaskSpec:
    return SyntheticTaskSpec(
        n_way=args.ways,
        k_shot=args.shots,
        m_query=args.queries,
        dim=args.dim,
        between_class_scale=args.between_scale,
        within_class_scale=args.within_scale,
        seed=args.seed,
    )


def _cost_note(source, cfg, args) -> None:
    """Estimate per-episode cost of the adaptation loop from one timed step."""
    if isinstance(source, SyntheticTaskSpec):
        embeddings, episode = generate_synthetic(source)
    else:
        from .evaluation import sample_episode

        episode = sample_episode(source, args.ways, args.shots, args.queries, args.seed)
        embeddings = source
    local = preprocess(
        EmbeddingSet(episode_matrix(embeddings, episode)), cfg.preprocess
    )
    probe = localize(episode)
    begin = time.perf_counter()
    anchor_gradient(local.vectors, probe, cfg)
    per_step = time.perf_counter() - begin
    print(
        f"# note: steps={cfg.steps} is costly; estimated ~{per_step * cfg.steps:.1f}s "
        f"per episode for a2lp",
        file=sys.stderr,
    )


def cmd_bench(args) -> int:
    cfg = _config_from(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if args.synthetic:
        source = _synthetic_spec(args)
    else:
        source = load_embeddings(args.embeddings)
    if cfg.steps > 200 and "a2lp" in methods:
        _cost_note(source, cfg, args)
    report = run_benchmark(
        source,
        methods,
        episodes=args.episodes,
        base_seed=args.seed,
        cfg=cfg,
        n_way=args.ways,
        k_shot=args.shots,
        m_query=args.queries,
        jobs=args.jobs,
        preprocess_scope=args.preprocess_scope,
        imprint_steps=args.imprint_steps,
        imprint_lr=args.imprint_lr,
        imprint_scale=args.imprint_scale,
    )
    sys.stdout.write(render_report(report))
    print(f"# wall_time_s={report.wall_time_s:.3f} jobs={args.jobs}", file=sys.stderr)
    return 0


def _parse_index_spec(spec: str, file_labels: np.ndarray | None, want_labels: bool):
    """Parse 'i,j,...' or 'i:label,...' index lists."""
    indices, labels = [], []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        if ":" in token:
            idx, _, label = token.partition(":")
            indices.append(int(idx))
            labels.append(int(label))
        else:
            indices.append(int(token))
            if want_labels:
                if file_labels is None:
                    raise A2lpError(
                        f"support index {token} has no label and the file carries none; "
                        "use index:label"
                    )
                labels.append(int(file_labels[int(token)]))
    return np.array(indices, dtype=np.int64), (np.array(labels, dtype=np.int64) if want_labels else None)


def _dump_graph(vectors: np.ndarray, cfg: A2lpConfig, path: str) -> None:
    """Coordinate-format dump (``i j value`` lines) of the affinity and its
    normalization, for fixture generation."""
    affinity = build_affinity(vectors, cfg.graph)
    graph = normalize_graph(affinity)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("# affinity\n")
        coo = affinity.tocoo()
        for i, j, value in zip(coo.row, coo.col, coo.data):
            handle.write(f"{i} {j} {float(value)!r}\n")
        handle.write("# normalized\n")
        coo = graph.normalized_adjacency.tocoo()
        for i, j, value in zip(coo.row, coo.col, coo.data):
            handle.write(f"{i} {j} {float(value)!r}\n")


def cmd_solve(args) -> int:
    cfg = _config_from(args)
    embeddings = load_embeddings(args.embeddings)
    support_spec = args.support
    query_spec = args.query
    if args.support_file:
        support_spec = open(args.support_file).read().replace("\n", ",")
    if args.query_file:
        query_spec = open(args.query_file).read().replace("\n", ",")
    if not support_spec or not query_spec:
        raise A2lpError("both --support and --query index lists are required")
    support_idx, support_raw = _parse_index_spec(support_spec, embeddings.labels, True)
    query_idx, _ = _parse_index_spec(query_spec, None, False)

    # remap support class ids to 0..N-1 in first-appearance order
    class_ids = list(dict.fromkeys(support_raw.tolist()))
    remap = {cls: way for way, cls in enumerate(class_ids)}
    support_labels = np.array([remap[c] for c in support_raw], dtype=np.int64)
    counts = np.bincount(support_labels)
    if (counts != counts[0]).any():
        raise A2lpError("support must contain the same number of shots per class")

    # ground truth for the trace, when the file carries usable labels
    query_labels = None
    if embeddings.labels is not None:
        raw = embeddings.labels[query_idx]
        if all(int(label) in remap for label in raw):
            query_labels = np.array([remap[int(label)] for label in raw], dtype=np.int64)

    episode = Episode(
        support_indices=support_idx,
        support_labels=support_labels,
        query_indices=query_idx,
        query_labels=query_labels,
        n_way=len(class_ids),
        k_shot=int(counts[0]),
        m_query=0,
    )
    local = preprocess(
        EmbeddingSet(episode_matrix(embeddings, episode)), cfg.preprocess
    )
    if args.dump_graph:
        _dump_graph(local.vectors, cfg, args.dump_graph)
    predictions, diagnostics = run_a2lp(
        local, localize(episode), cfg, track_accuracy=args.trace
    )
    if args.trace:
        for record in diagnostics.records:
            line = (
                f"step={record.step} loss={record.loss:.6e} "
                f"displacement={record.anchor_displacement:.6e}"
            )
            if record.query_accuracy is not None:
                line += f" query_accuracy={record.query_accuracy:.4f}"
            print(line, file=sys.stderr)
    for prediction in predictions:
        print(class_ids[prediction])
    return 0


def cmd_gradcheck(args) -> int:
    cfg = A2lpConfig(
        graph=GraphConfig(k=args.k, gamma=args.gamma),
        alpha=args.alpha,
        tau=args.tau,
    )
    report = gradient_check(args.trials, args.seed, cfg=cfg)
    if report.passed:
        print(f"max_rel_err={report.max_rel_err:.3e}, PASS")
        return 0
    worst = report.worst
    print(
        f"max_rel_err={report.max_rel_err:.3e}, FAIL "
        f"(trial {worst.trial}, seed {worst.seed}, T={worst.size}, d={worst.dim})"
    )
    return 2


def cmd_synth(args) -> int:
    embeddings, _ = generate_synthetic(_synthetic_spec(args))
    save_embeddings(embeddings, args.out, format=args.format)
    print(f"wrote {embeddings.count}x{embeddings.dim} embeddings to {args.out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="a2lp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="paired benchmark of inference methods")
    src = bench.add_mutually_exclusive_group(required=True)
    src.add_argument("--embeddings", help="binary embeddings file")
    src.add_argument("--synthetic", action="store_true", help="generate synthetic tasks")
    bench.add_argument("--ways", type=int, default=5)
    bench.add_argument("--shots", type=int, default=1)
    bench.add_argument("--queries", type=int, default=15)
    bench.add_argument("--episodes", type=int, default=1000)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--methods", default="proto,imprint,lp,a2lp")
    bench.add_argument("--jobs", type=int, default=1, help="concurrent episode workers")
    bench.add_argument("--preprocess-scope", choices=["episode", "global"], default="episode")
    bench.add_argument("--dim", type=int, default=64, help="synthetic feature dimension")
    bench.add_argument("--between-scale", type=float, default=1.0)
    bench.add_argument("--within-scale", type=float, default=0.35)
    bench.add_argument("--imprint-steps", type=int, default=100)
    bench.add_argument("--imprint-lr", type=float, default=0.01)
    bench.add_argument("--imprint-scale", type=float, default=10.0)
    _add_pipeline_flags(bench)
    bench.set_defaults(func=cmd_bench)

    solve = sub.add_parser("solve", help="classify queries of a single task")
    solve.add_argument("--embeddings", required=True)
    solve.add_argument("--support", help="comma list of support indices, or index:label pairs")
    solve.add_argument("--query", help="comma list of query indices")
    solve.add_argument("--support-file")
    solve.add_argument("--query-file")
    solve.add_argument("--trace", action="store_true", help="per-step diagnostics on stderr")
    solve.add_argument(
        "--dump-graph", metavar="PATH",
        help="write the task's affinity and normalized adjacency as 'i j value' lines",
    )
    _add_pipeline_flags(solve)
    solve.set_defaults(func=cmd_solve)

    gradcheck = sub.add_parser("gradcheck", help="verify analytic gradients numerically")
    gradcheck.add_argument("--trials", type=int, default=20)
    gradcheck.add_argument("--seed", type=int, default=0)
    gradcheck.add_argument("--alpha", type=float, default=0.8)
    gradcheck.add_argument("--gamma", type=float, default=3.0)
    gradcheck.add_argument("--tau", type=float, default=15.0)
    gradcheck.add_argument("--k", type=int, default=20)
    gradcheck.set_defaults(func=cmd_gradcheck)

    synth = sub.add_parser("synth", help="write a synthetic embedding file")
    synth.add_argument("--out", required=True)
    synth.add_argument("--format", choices=["binary", "csv"], default="binary")
    synth.add_argument("--ways", type=int, default=5)
    synth.add_argument("--shots", type=int, default=1)
    synth.add_argument("--queries", type=int, default=15)
    synth.add_argument("--dim", type=int, default=64)
    synth.add_argument("--between-scale", type=float, default=1.0)
    synth.add_argument("--within-scale", type=float, default=0.35)
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except A2lpError as exc:
        print(f"a2lp: error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"a2lp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
