"""Distance-stratified minibatch sampling.

Datapoints are weighted by the inverse frequency of their distance
histogram bin so minibatches see a balanced spread of ranges.
"""

from __future__ import annotations

import numpy as np


def stratified_weights(distances: np.ndarray, bins: int = 10) -> np.ndarray:
    """Normalized sampling weights, inversely proportional to the count of
    each point's distance bin. Empty bins are never indexed."""
    distances = np.asarray(distances, dtype=float)
    if distances.size == 0:
        raise ValueError("no distances to stratify")
    counts, edges = np.histogram(distances, bins=bins)
    idx = np.clip(np.digitize(distances, edges[1:-1]), 0, bins - 1)
    weights = 1.0 / counts[idx]
    return weights / weights.sum()


def stratified_sampler(distances: np.ndarray, batch_size: int,
                       rng: np.random.Generator, bins: int = 10,
                       weights: np.ndarray | None = None) -> np.ndarray:
    """Minibatch indices drawn with replacement under stratified weights.

    Pass a precomputed `weights` vector to avoid re-binning every draw.
    """
    if weights is None:
        weights = stratified_weights(distances, bins)
    return rng.choice(len(weights), size=batch_size, replace=True, p=weights)
