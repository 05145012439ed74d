"""Two-layer trainable classifier.

A model maps an input vector to a hidden embedding with a tanh layer
and the embedding to class probabilities with a softmax layer.  The
embedding doubles as the representation used by sample selection and
drift tracking, so the forward pass always returns both.

Training is plain minibatch SGD on the mean cross-entropy loss with
exact analytic gradients (no autograd).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels


@dataclass(frozen=True)
class ModelConfig:
    """Architecture: input_dim -> hidden_dim (tanh) -> num_classes (softmax)."""

    input_dim: int
    hidden_dim: int
    num_classes: int

    def __post_init__(self) -> None:
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")

    @property
    def num_params(self) -> int:
        d, h, k = self.input_dim, self.hidden_dim, self.num_classes
        return h * d + h + k * h + k


@dataclass(frozen=True, eq=False)
class ModelWeights:
    """Parameter set (or gradient set) for one model."""

    config: ModelConfig
    w1: np.ndarray = field(repr=False)
    b1: np.ndarray = field(repr=False)
    w2: np.ndarray = field(repr=False)
    b2: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        d, h, k = self.config.input_dim, self.config.hidden_dim, self.config.num_classes
        for name, arr, shape in (
            ("w1", self.w1, (h, d)),
            ("b1", self.b1, (h,)),
            ("w2", self.w2, (k, h)),
            ("b2", self.b2, (k,)),
        ):
            norm = np.ascontiguousarray(arr, dtype=np.float64)
            if norm.shape != shape:
                raise ValueError(f"{name} has shape {norm.shape}, expected {shape}")
            if not np.isfinite(norm).all():
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, norm)

    def copy(self) -> "ModelWeights":
        return ModelWeights(
            self.config, self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy()
        )

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    @classmethod
    def from_flat(cls, config: ModelConfig, flat: np.ndarray) -> "ModelWeights":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (config.num_params,):
            raise ValueError(f"expected {config.num_params} parameters, got {flat.shape}")
        d, h, k = config.input_dim, config.hidden_dim, config.num_classes
        i = 0
        w1 = flat[i : i + h * d].reshape(h, d); i += h * d
        b1 = flat[i : i + h]; i += h
        w2 = flat[i : i + k * h].reshape(k, h); i += k * h
        b2 = flat[i : i + k]
        return cls(config, w1.copy(), b1.copy(), w2.copy(), b2.copy())


@dataclass(frozen=True, eq=False)
class Prediction:
    """Output of one forward pass: class distribution plus summaries."""

    probs: np.ndarray = field(repr=False)
    label: int
    entropy: float


def init_weights(config: ModelConfig, rng: np.random.Generator) -> ModelWeights:
    """Seeded uniform init in [-r, r] with r = 1/sqrt(fan_in) per layer."""
    d, h, k = config.input_dim, config.hidden_dim, config.num_classes
    r1 = 1.0 / math.sqrt(d)
    r2 = 1.0 / math.sqrt(h)
    return ModelWeights(
        config,
        rng.uniform(-r1, r1, (h, d)),
        rng.uniform(-r1, r1, h),
        rng.uniform(-r2, r2, (k, h)),
        rng.uniform(-r2, r2, k),
    )


def _entropy_fast(probs: np.ndarray) -> float:
    nz = probs[probs > 0.0]
    return float(-(nz * np.log(nz)).sum())


def _check_x(weights: ModelWeights, x: np.ndarray) -> np.ndarray:
    xv = np.ascontiguousarray(x, dtype=np.float64)
    if xv.ndim != 1 or xv.shape[0] != weights.config.input_dim:
        raise ValueError(
            f"input has shape {xv.shape}, expected ({weights.config.input_dim},)"
        )
    if not np.isfinite(xv).all():
        raise ValueError("input contains non-finite values")
    return xv


def _check_batch(
    weights: ModelWeights, x: np.ndarray, y: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray | None]:
    xb = np.ascontiguousarray(x, dtype=np.float64)
    if xb.ndim != 2 or xb.shape[1] != weights.config.input_dim:
        raise ValueError(
            f"batch has shape {xb.shape}, expected (n, {weights.config.input_dim})"
        )
    if xb.shape[0] == 0:
        raise ValueError("batch is empty")
    if not np.isfinite(xb).all():
        raise ValueError("batch contains non-finite values")
    if y is None:
        return xb, None
    yb = np.ascontiguousarray(y, dtype=np.int64)
    if yb.shape != (xb.shape[0],):
        raise ValueError(f"labels have shape {yb.shape}, expected ({xb.shape[0]},)")
    if yb.min() < 0 or yb.max() >= weights.config.num_classes:
        raise ValueError("label out of range")
    return xb, yb


def forward(weights: ModelWeights, x: np.ndarray) -> tuple[np.ndarray, Prediction]:
    """Forward pass for one input: (embedding, Prediction).

    Embedding components are tanh outputs, so each lies in (-1, 1);
    probabilities are a softmax, so they are positive and sum to 1.
    """
    xv = _check_x(weights, x)
    emb, probs = kernels.forward_one(weights.w1, weights.b1, weights.w2, weights.b2, xv)
    return emb, Prediction(probs=probs, label=int(np.argmax(probs)), entropy=_entropy_fast(probs))


def forward_batch(weights: ModelWeights, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise forward pass: (embeddings (n,h), probabilities (n,k))."""
    xb, _ = _check_batch(weights, x)
    return kernels.forward_batch(weights.w1, weights.b1, weights.w2, weights.b2, xb)


def cross_entropy_loss(pred: Prediction, label: int) -> float:
    """Negative log probability of the true label under the prediction."""
    probs = pred.probs
    if not 0 <= label < probs.shape[0]:
        raise ValueError(f"label {label} out of range for {probs.shape[0]} classes")
    p = float(probs[label])
    return math.inf if p <= 0.0 else -math.log(p)


def mean_loss(weights: ModelWeights, x: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy of a labeled batch."""
    xb, yb = _check_batch(weights, x, y)
    _, probs = kernels.forward_batch(weights.w1, weights.b1, weights.w2, weights.b2, xb)
    picked = probs[np.arange(xb.shape[0]), yb]
    if np.any(picked <= 0.0):
        return math.inf
    return float(-np.log(picked).mean())


def gradient(weights: ModelWeights, x: np.ndarray, y: np.ndarray) -> ModelWeights:
    """Exact gradient of mean_loss with respect to every parameter."""
    xb, yb = _check_batch(weights, x, y)
    gw1, gb1, gw2, gb2 = kernels.grad_batch(
        weights.w1, weights.b1, weights.w2, weights.b2, xb, yb
    )
    return ModelWeights(weights.config, gw1, gb1, gw2, gb2)


def accuracy(weights: ModelWeights, x: np.ndarray, y: np.ndarray) -> float:
    """Fraction of argmax predictions matching the labels."""
    xb, yb = _check_batch(weights, x, y)
    _, probs = kernels.forward_batch(weights.w1, weights.b1, weights.w2, weights.b2, xb)
    return float((probs.argmax(axis=1) == yb).mean())


def sgd_epoch(
    weights: ModelWeights,
    x: np.ndarray,
    y: np.ndarray,
    learning_rate: float,
    holdout_x: np.ndarray | None,
    holdout_y: np.ndarray | None,
    *,
    batch_size: int = 8,
    rng: np.random.Generator | None = None,
) -> tuple[ModelWeights, float | None]:
    """One full pass of minibatch SGD; returns (new weights, holdout accuracy).

    The pass visits every item exactly once, in a seeded shuffle when
    `rng` is given and in natural order otherwise.  Holdout accuracy is
    None when the holdout is empty.  learning_rate 0 is a no-op pass.
    """
    if not math.isfinite(learning_rate) or learning_rate < 0.0:
        raise ValueError("learning_rate must be >= 0")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    xb, yb = _check_batch(weights, x, y)
    n = xb.shape[0]
    new = weights.copy()
    if learning_rate > 0.0:
        order = rng.permutation(n) if rng is not None else np.arange(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            g = gradient(new, xb[idx], yb[idx])
            new = ModelWeights(
                new.config,
                new.w1 - learning_rate * g.w1,
                new.b1 - learning_rate * g.b1,
                new.w2 - learning_rate * g.w2,
                new.b2 - learning_rate * g.b2,
            )
    hold_acc: float | None = None
    if holdout_x is not None and holdout_y is not None and len(holdout_x) > 0:
        hold_acc = accuracy(new, holdout_x, holdout_y)
    return new, hold_acc
