"""Embedding files and preprocessing.

The engine consumes precomputed feature vectors. This walk-through
creates a small set, saves it in both supported formats, and shows the
two preprocessing pipelines:

  l2   scale every row to unit Euclidean norm (the default)
  plc  element-wise square root, then l2, then centering by the mean of
       the normalized set (in that order, so rows end up off the sphere)
"""

import tempfile
from pathlib import Path

import numpy as np

from a2lp import EmbeddingSet, l2_normalize, load_embeddings, plc_preprocess, save_embeddings

rng = np.random.default_rng(0)

# nonnegative features, like the output of a ReLU network
features = np.abs(rng.standard_normal((6, 4)))
labels = np.array([0, 0, 1, 1, 2, 2])
embeddings = EmbeddingSet(features, labels)
print("raw vectors:\n", np.round(embeddings.vectors, 3))

workdir = Path(tempfile.mkdtemp())
binary_path = workdir / "toy.a2lp"
csv_path = workdir / "toy.csv"
save_embeddings(embeddings, binary_path)            # canonical interchange format
save_embeddings(embeddings, csv_path, format="csv")  # for hand-written fixtures
print(f"\nwrote {binary_path.stat().st_size} bytes binary, "
      f"{csv_path.stat().st_size} bytes csv")

reloaded = load_embeddings(binary_path)
print("binary payload is float32, so the round trip is exact for float32 data")
print("max reload error:", np.abs(reloaded.vectors - embeddings.vectors.astype(np.float32)).max())

normalized = l2_normalize(reloaded)
print("\nafter l2: row norms =", np.round(np.linalg.norm(normalized.vectors, axis=1), 12))

powered = plc_preprocess(reloaded)
print("after plc: mean row =", np.round(powered.vectors.mean(axis=0), 12))
print("after plc: row norms =", np.round(np.linalg.norm(powered.vectors, axis=1), 3),
      "(centering comes last, so rows leave the unit sphere)")
