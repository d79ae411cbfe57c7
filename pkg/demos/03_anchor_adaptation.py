"""Adaptive anchor label propagation on one task.

Plain label propagation keeps every point fixed. The adaptive variant
treats the labeled support rows as movable anchors: each step rebuilds
the graph, propagates, scores the anchors with a tempered softmax and
cross-entropy, and moves the anchor rows down the exact analytic
gradient of that loss (queries never move). Better-placed anchors make
the propagation itself more accurate.

This demo runs a deliberately noisy episode and traces the loop.
"""

import numpy as np

from a2lp import (
    A2lpConfig,
    EmbeddingSet,
    episode_matrix,
    generate_synthetic,
    l2_normalize,
    localize,
    plain_lp_classify,
    run_a2lp,
    score,
    SyntheticTaskSpec,
)

spec = SyntheticTaskSpec(
    n_way=5, k_shot=1, m_query=15, dim=64,
    between_class_scale=1.0, within_class_scale=2.2, seed=42,
)
raw, episode = generate_synthetic(spec)
labels = np.concatenate([episode.support_labels, episode.query_labels])
embeddings = l2_normalize(EmbeddingSet(episode_matrix(raw, episode), labels, spec.n_way))
episode = localize(episode)

cfg = A2lpConfig(steps=300)  # published defaults except a shorter loop
baseline = plain_lp_classify(embeddings, episode, cfg)
print("plain label propagation accuracy:", score(baseline, episode.query_labels))

predictions, diagnostics = run_a2lp(embeddings, episode, cfg, track_accuracy=True)
print("adaptive anchor accuracy:        ", score(predictions, episode.query_labels))

print("\n step    loss        anchor shift   query accuracy")
for record in diagnostics.records[:: max(1, cfg.steps // 10)]:
    print(f"{record.step:5d}   {record.loss:.3e}   {record.anchor_displacement:12.5f}"
          f"   {record.query_accuracy:.3f}")
print(f"\nloss {diagnostics.initial_loss:.3e} -> {diagnostics.final_loss:.3e}; "
      f"anchors moved {diagnostics.records[-1].anchor_displacement:.4f} in norm, "
      "queries stayed put")
