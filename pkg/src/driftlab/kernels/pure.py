"""Numpy reference kernels for the two-layer model.

These are the fallback implementations of the three hot paths:
single-item forward, batched forward, and the batched gradient of the
mean cross-entropy loss.  The compiled module `_speedups` mirrors the
same signatures and algorithms (including the max-shifted softmax).
"""

from __future__ import annotations

import numpy as np


def forward_one(w1, b1, w2, b2, x):
    """Embedding and class probabilities for one input vector.

    Returns (emb, probs) where emb = tanh(w1 @ x + b1) and probs is the
    softmax of w2 @ emb + b2.
    """
    emb = np.tanh(w1 @ x + b1)
    logits = w2 @ emb + b2
    logits = logits - logits.max()
    np.exp(logits, out=logits)
    probs = logits / logits.sum()
    return emb, probs


def forward_batch(w1, b1, w2, b2, x):
    """Row-wise forward pass: returns (emb (n,h), probs (n,k))."""
    emb = np.tanh(x @ w1.T + b1)
    logits = emb @ w2.T + b2
    logits -= logits.max(axis=1, keepdims=True)
    np.exp(logits, out=logits)
    probs = logits / logits.sum(axis=1, keepdims=True)
    return emb, probs


def grad_batch(w1, b1, w2, b2, x, y):
    """Gradient of the mean cross-entropy over the batch.

    Returns (gw1, gb1, gw2, gb2) with the same shapes as the weights.
    """
    n = x.shape[0]
    emb, probs = forward_batch(w1, b1, w2, b2, x)
    dlogits = probs
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    gw2 = dlogits.T @ emb
    gb2 = dlogits.sum(axis=0)
    demb = dlogits @ w2
    dpre = demb * (1.0 - emb * emb)
    gw1 = dpre.T @ x
    gb1 = dpre.sum(axis=0)
    return gw1, gb1, gw2, gb2
