"""Small vector operations shared across the package.

These are the numeric primitives the selection, drift, and meta-update
logic are defined in terms of: entropy of a distribution, cosine
similarity, embedding centroids, and weight-space interpolation.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from .model import ModelWeights

_SIMPLEX_ATOL = 1e-9


def entropy(probs: np.ndarray) -> float:
    """Shannon entropy in nats of a probability vector.

    Rejects vectors with negative mass or mass not summing to 1 within
    1e-9.  Zero entries contribute zero (0 * log 0 := 0).
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probs must be a non-empty 1-d vector")
    if np.any(p < -_SIMPLEX_ATOL):
        raise ValueError("probs has negative entries")
    if abs(float(p.sum()) - 1.0) > _SIMPLEX_ATOL:
        raise ValueError("probs must sum to 1")
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two equal-length vectors.

    Zero-norm inputs are rejected: the similarity is undefined there.
    The result is clamped to [-1, 1] against rounding spill.
    """
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.ndim != 1 or bv.ndim != 1 or av.shape != bv.shape:
        raise ValueError(f"shape mismatch: {av.shape} vs {bv.shape}")
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for zero-norm input")
    return float(min(1.0, max(-1.0, float(av @ bv) / (na * nb))))


def centroid(embeddings: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Component-wise mean of a non-empty set of equal-length vectors."""
    if isinstance(embeddings, np.ndarray) and embeddings.ndim == 2:
        mat = np.asarray(embeddings, dtype=np.float64)
    else:
        rows = list(embeddings)
        if not rows:
            raise ValueError("centroid of an empty set is undefined")
        mat = np.stack([np.asarray(r, dtype=np.float64) for r in rows])
    if mat.shape[0] == 0:
        raise ValueError("centroid of an empty set is undefined")
    return mat.mean(axis=0)


def interpolate(phi: ModelWeights, zeta: ModelWeights, eps: float) -> ModelWeights:
    """Component-wise convex combination (1 - eps) * phi + eps * zeta.

    eps must lie in [0, 1].  The endpoints return exact copies, and the
    blended form phi + eps * (zeta - phi) keeps every component inside
    the closed interval spanned by phi and zeta even under rounding.
    """
    if not math.isfinite(eps) or eps < 0.0 or eps > 1.0:
        raise ValueError(f"eps must be in [0, 1], got {eps}")
    if phi.config != zeta.config:
        raise ValueError("weight shapes differ")
    if eps == 0.0:
        return phi.copy()
    if eps == 1.0:
        return zeta.copy()
    return ModelWeights(
        config=phi.config,
        w1=phi.w1 + eps * (zeta.w1 - phi.w1),
        b1=phi.b1 + eps * (zeta.b1 - phi.b1),
        w2=phi.w2 + eps * (zeta.w2 - phi.w2),
        b2=phi.b2 + eps * (zeta.b2 - phi.b2),
    )
