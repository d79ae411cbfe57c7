"""Independent reference implementations used by several test modules.

These deliberately avoid the library's own code paths: the affinity
oracle is a per-column scan with an explicit sort, and the fixed-point
propagation oracle lives in the library itself (propagate_iterative) as
the classical iteration underlying the closed form.
"""

import numpy as np


def brute_force_affinity(vectors, k, gamma):
    """O(T^2) per-column neighbour scan with the documented tie-break.

    Ties at the k-th rank go to the lower row index, made explicit here
    by sorting (-similarity, row) pairs.
    """
    count = vectors.shape[0]
    norms = np.linalg.norm(vectors, axis=1)
    unit = vectors / norms[:, None]
    sims = unit @ unit.T
    affinity = np.zeros((count, count))
    pattern = np.zeros((count, count), dtype=bool)
    for col in range(count):
        candidates = [(-sims[row, col], row) for row in range(count) if row != col]
        candidates.sort()
        for _, row in candidates[:k]:
            pattern[row, col] = True
            affinity[row, col] = max(sims[row, col], 0.0) ** gamma
    return affinity, pattern
