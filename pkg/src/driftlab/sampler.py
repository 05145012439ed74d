"""Online training-set curation.

Two stages, both running off embeddings cached at inference time:

1. A diversity buffer deduplicates the stream in embedding space: an
   offered item is kept only if its minimum cosine distance to every
   buffered embedding clears an adaptive threshold (a percentile of a
   rolling window of recent min-distances).
2. Just before a retrain, the buffered candidates are ranked by the
   prediction entropy of the base model and the most uncertain
   fraction is sent to the labeler, whose cost is metered by a ledger.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .model import ModelWeights, forward_batch
from .stream import DataItem


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs for the diversity buffer and the prioritization stage."""

    capacity: int = 256
    percentile: float = 0.3
    window_size: int = 512
    top_fraction: float = 0.05
    bootstrap_threshold: float = 0.05
    min_window: int = 8

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if not 0.0 < self.percentile < 1.0:
            raise ValueError("percentile must be in (0, 1)")
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if not 0.0 < self.top_fraction <= 1.0:
            raise ValueError("top_fraction must be in (0, 1]")
        if not (math.isfinite(self.bootstrap_threshold) and self.bootstrap_threshold >= 0.0):
            raise ValueError("bootstrap_threshold must be >= 0")
        if self.min_window < 1:
            raise ValueError("min_window must be >= 1")


@dataclass
class LabelLedger:
    """Counts ground-truth labels consumed; labeling itself is free."""

    total: int = 0
    per_round: list[int] = field(default_factory=list)

    def charge(self, count: int) -> None:
        if count < 0:
            raise ValueError("cannot charge a negative label count")
        self.total += count
        self.per_round.append(count)


@dataclass(frozen=True, eq=False)
class OfferRecord:
    """Log row for one offer: distance observed, threshold applied, verdict."""

    min_distance: float | None
    threshold: float
    accepted: bool


def adaptive_threshold(recent_distances: np.ndarray, percentile: float) -> float:
    """p-th percentile of the window, linear interpolation between order stats."""
    window = np.asarray(recent_distances, dtype=np.float64)
    if window.ndim != 1 or window.size == 0:
        raise ValueError("distance window must be a non-empty vector")
    if not 0.0 < percentile < 1.0:
        raise ValueError("percentile must be in (0, 1)")
    return float(np.percentile(window, percentile * 100.0))


class DiversityBuffer:
    """Bounded candidate buffer with adaptive cosine-distance dedup.

    The threshold applied to an offer is the one computed before that
    offer; the observed min-distance is pushed into the rolling window
    (whenever the buffer was non-empty, accepted or not) and the stored
    threshold refreshed afterwards.  Eviction is oldest-first.
    """

    def __init__(self, config: SamplerConfig):
        self.config = config
        self.items: list[DataItem] = []
        self.accept_thresholds: list[float] = []
        self._embs: list[np.ndarray] = []
        self._norms: list[float] = []
        self._matrix: np.ndarray | None = None
        self._norm_arr: np.ndarray | None = None
        self.window: deque[float] = deque(maxlen=config.window_size)
        self.threshold: float = config.bootstrap_threshold
        self.offered: int = 0
        self.accepted: int = 0
        self.offer_log: list[OfferRecord] = []

    def __len__(self) -> int:
        return len(self.items)

    def _current_threshold(self) -> float:
        if len(self.window) < self.config.min_window:
            return self.config.bootstrap_threshold
        return adaptive_threshold(np.asarray(self.window), self.config.percentile)

    def _stack(self) -> tuple[np.ndarray, np.ndarray]:
        if self._matrix is None:
            self._matrix = np.stack(self._embs)
            self._norm_arr = np.asarray(self._norms)
        return self._matrix, self._norm_arr

    def offer(self, item: DataItem, embedding: np.ndarray) -> bool:
        """Offer one (item, embedding) pair; returns the accept decision."""
        emb = np.ascontiguousarray(embedding, dtype=np.float64)
        if emb.ndim != 1:
            raise ValueError("embedding must be a 1-d vector")
        if self._embs and emb.shape != self._embs[0].shape:
            raise ValueError(
                f"embedding dim {emb.shape[0]} != buffer dim {self._embs[0].shape[0]}"
            )
        if not np.isfinite(emb).all():
            raise ValueError("embedding contains non-finite values")
        enorm = float(np.linalg.norm(emb))
        if enorm == 0.0:
            raise ValueError("zero-norm embedding has no cosine distance")

        threshold = self._current_threshold()
        self.offered += 1
        if not self._embs:
            min_dist: float | None = None
            accepted = True
        else:
            mat, norms = self._stack()
            sims = (mat @ emb) / (norms * enorm)
            min_dist = float((1.0 - sims).min())
            self.window.append(min_dist)
            accepted = min_dist >= threshold
        if accepted:
            if len(self.items) == self.config.capacity:
                self.items.pop(0)
                self.accept_thresholds.pop(0)
                self._embs.pop(0)
                self._norms.pop(0)
            self.items.append(item)
            self.accept_thresholds.append(threshold)
            self._embs.append(emb)
            self._norms.append(enorm)
            self._matrix = None
            self._norm_arr = None
            self.accepted += 1
        self.offer_log.append(OfferRecord(min_dist, threshold, accepted))
        self.threshold = self._current_threshold()
        return accepted

    def snapshot(self) -> tuple[list[DataItem], list[np.ndarray]]:
        """Copy of the buffered (items, embeddings), oldest first."""
        return list(self.items), [e.copy() for e in self._embs]

    def clear(self) -> None:
        """Drop buffered candidates; the distance window keeps rolling."""
        self.items = []
        self.accept_thresholds = []
        self._embs = []
        self._norms = []
        self._matrix = None
        self._norm_arr = None

    def reset_counters(self) -> None:
        self.offered = 0
        self.accepted = 0
        self.offer_log = []


class UniformBuffer:
    """Ablation baseline: keep every offer, select uniformly at random."""

    def __init__(self) -> None:
        self.items: list[DataItem] = []
        self.offered: int = 0
        self.accepted: int = 0

    def __len__(self) -> int:
        return len(self.items)

    def offer(self, item: DataItem, embedding: np.ndarray) -> bool:
        self.offered += 1
        self.accepted += 1
        self.items.append(item)
        return True

    def select(self, rng: np.random.Generator, count: int) -> list[DataItem]:
        if count >= len(self.items):
            return list(self.items)
        idx = rng.choice(len(self.items), size=count, replace=False)
        return [self.items[i] for i in sorted(idx)]

    def snapshot(self) -> tuple[list[DataItem], list]:
        return list(self.items), []

    def clear(self) -> None:
        self.items = []

    def reset_counters(self) -> None:
        self.offered = 0
        self.accepted = 0


def prioritize(
    buffer_items: list[DataItem],
    base: ModelWeights,
    top_fraction: float,
) -> list[DataItem]:
    """Most-uncertain candidates under the base model.

    Ranks by prediction entropy descending and returns the top
    ceil(top_fraction * size) items in rank order.  Ties break toward
    the earlier arrival_time, then the lower buffer index, so the
    ranking is fully deterministic.
    """
    if not 0.0 < top_fraction <= 1.0:
        raise ValueError("top_fraction must be in (0, 1]")
    if not buffer_items:
        raise ValueError("cannot prioritize an empty buffer")
    x = np.stack([item.features for item in buffer_items])
    _, probs = forward_batch(base, x)
    safe = np.where(probs > 0.0, probs, 1.0)
    entropies = -(probs * np.log(safe)).sum(axis=1)
    order = sorted(
        range(len(buffer_items)),
        key=lambda i: (-entropies[i], buffer_items[i].arrival_time, i),
    )
    count = math.ceil(top_fraction * len(buffer_items))
    return [buffer_items[i] for i in order[:count]]


def label(items: list[DataItem], ledger: LabelLedger) -> tuple[list[DataItem], LabelLedger]:
    """Ground-truth labeling with metered cost.

    The simulation's labeler is an oracle: labels are already carried
    by the items.  The ledger records how many were requested.
    """
    ledger.charge(len(items))
    return list(items), ledger
