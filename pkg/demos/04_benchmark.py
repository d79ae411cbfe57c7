"""The episode benchmark protocol.

Few-shot methods are scored over many sampled N-way K-shot tasks: mean
accuracy (percent) with a 95% confidence half-width of 1.96 * stderr
over the per-episode accuracies. Every method sees byte-identical
episodes (seed = base seed + episode index), so a benchmark is a paired
comparison, reproducible for any worker count.

The same protocol runs from the command line:

    a2lp bench --synthetic --within-scale 2.2 --episodes 200 \
        --methods proto,imprint,lp,a2lp --steps 100 --jobs 2
"""

from a2lp import A2lpConfig, SyntheticTaskSpec, render_report, run_benchmark

spec = SyntheticTaskSpec(
    n_way=5, k_shot=1, m_query=15, dim=64,
    between_class_scale=1.0, within_class_scale=2.2,
)
cfg = A2lpConfig(steps=100)  # shorter loop than the published 1000 steps

report = run_benchmark(
    spec,
    methods=["proto", "imprint", "lp", "a2lp"],
    episodes=200,
    base_seed=0,
    cfg=cfg,
    jobs=2,
)
print(render_report(report))
print(f"(wall time: {report.wall_time_s:.1f}s)")
