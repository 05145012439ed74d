"""Fixed probe inputs that make model distances well-defined.

Two models can only be compared through their behavior, so we embed a
fixed, seeded batch of probe inputs with each and compare the mean
embeddings.  Every module that needs a "distance between models" uses
this one definition.
"""

from __future__ import annotations

import numpy as np

from .model import ModelConfig, ModelWeights, forward_batch
from .seeding import rng_for

DEFAULT_PROBE_COUNT = 64
DEFAULT_PROBE_SEED = 53681
DEFAULT_PROBE_SCALE = 2.0


def probe_features(
    config: ModelConfig,
    count: int = DEFAULT_PROBE_COUNT,
    seed: int = DEFAULT_PROBE_SEED,
    scale: float = DEFAULT_PROBE_SCALE,
) -> np.ndarray:
    """Seeded (count, input_dim) gaussian probe batch, scaled to sit in
    the same shell as typical scene features."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if not scale > 0.0:
        raise ValueError("scale must be > 0")
    rng = rng_for(seed, "probes")
    return scale * rng.standard_normal((count, config.input_dim))


def model_probe_centroid(weights: ModelWeights, probes: np.ndarray) -> np.ndarray:
    """Mean embedding of the probe batch under the given weights."""
    emb, _ = forward_batch(weights, probes)
    return emb.mean(axis=0)


def probe_distance(a: ModelWeights, b: ModelWeights, probes: np.ndarray) -> float:
    """Euclidean distance between the two models' probe centroids."""
    ca = model_probe_centroid(a, probes)
    cb = model_probe_centroid(b, probes)
    return float(np.linalg.norm(ca - cb))
