"""driftlab: deterministic simulator for continual scene adaptation.

Simulates an edge device whose single accelerator serializes inference
and retraining: a drifting synthetic stream, embedding-based sample
selection, score-controlled retraining, and an interpolated base model
that warm-starts future retrains.  Everything is seeded and replayable.
"""

from .model import ModelConfig, ModelWeights, Prediction, forward, init_weights
from .ops import centroid, cosine_similarity, entropy, interpolate

__version__ = "0.1.0"

__all__ = [
    "ModelConfig",
    "ModelWeights",
    "Prediction",
    "forward",
    "init_weights",
    "centroid",
    "cosine_similarity",
    "entropy",
    "interpolate",
    "__version__",
]
