"""Metric computation over RunTraces.

All metrics are pure functions of the trace (plus the script and the
shared probe batch), so anything reported in summary.json can be
recomputed from the emitted CSVs.  Accuracy conventions:

- overall_accuracy counts unserved items as incorrect (denominator =
  every generated arrival), so backlog left at the horizon costs
  accuracy instead of silently shrinking the denominator.
- served_accuracy is the fraction correct among served items only.
- windowed and per-segment accuracies bucket items by arrival time
  (not serve time), which keeps buckets aligned across policies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..ops import cosine_similarity
from ..probes import probe_distance
from ..scheduler import TAG_TRAINING, RunTrace
from ..stream import StreamScript

WINDOW_SECONDS = 5.0


@dataclass(frozen=True)
class WindowPoint:
    start: float
    count: int
    correct: int

    @property
    def accuracy(self) -> float | None:
        return None if self.count == 0 else self.correct / self.count


@dataclass(frozen=True)
class SegmentAccuracy:
    segment_index: int
    scene_id: int
    count: int
    correct: int

    @property
    def accuracy(self) -> float | None:
        return None if self.count == 0 else self.correct / self.count


@dataclass(eq=False)
class MetricsReport:
    """Per-run metrics; the summary.json payload."""

    policy: str
    seed: int
    generated: int
    served: int
    overall_accuracy: float
    served_accuracy: float | None
    training_time: float
    training_fraction: float
    selection_time: float
    label_total: int
    overloaded: bool
    convergence_round: int | None
    windowed: list[WindowPoint] = field(default_factory=list)
    segments: list[SegmentAccuracy] = field(default_factory=list)
    scene_distances: list[tuple[int, float]] = field(default_factory=list)
    base_distances: list[tuple[int, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "seed": self.seed,
            "generated": self.generated,
            "served": self.served,
            "overall_accuracy": self.overall_accuracy,
            "served_accuracy": self.served_accuracy,
            "training_time": self.training_time,
            "training_fraction": self.training_fraction,
            "selection_time": self.selection_time,
            "label_total": self.label_total,
            "overloaded": self.overloaded,
            "convergence_round": self.convergence_round,
            "windowed_accuracy": [
                [w.start, w.accuracy, w.count] for w in self.windowed
            ],
            "segment_accuracy": [
                [s.segment_index, s.scene_id, s.accuracy, s.count]
                for s in self.segments
            ],
            "scene_centroid_distance": [[k, d] for k, d in self.scene_distances],
            "base_specialized_distance": [[k, d] for k, d in self.base_distances],
        }


def overall_accuracy(trace: RunTrace) -> float:
    if trace.generated == 0:
        return 0.0
    correct = sum(1 for r in trace.items if r.correct)
    return correct / trace.generated


def served_accuracy(trace: RunTrace) -> float | None:
    served = [r for r in trace.items if r.served_time is not None]
    if not served:
        return None
    return sum(1 for r in served if r.correct) / len(served)


def training_time(trace: RunTrace) -> float:
    return sum(iv.duration for iv in trace.timeline if iv.tag == TAG_TRAINING)


def training_fraction(trace: RunTrace) -> float:
    return training_time(trace) / trace.horizon if trace.horizon > 0 else 0.0


def training_time_between(trace: RunTrace, t0: float, t1: float) -> float:
    """TRAINING seconds overlapping the window [t0, t1)."""
    total = 0.0
    for iv in trace.timeline:
        if iv.tag == TAG_TRAINING:
            total += max(0.0, min(iv.end, t1) - max(iv.start, t0))
    return total


def selection_time(trace: RunTrace) -> float:
    return sum(
        iv.duration
        for iv in trace.timeline
        if iv.tag == "inference" and iv.note.startswith("selection")
    )


def mean_session_train_units(trace: RunTrace) -> float | None:
    """Mean compute units spent per non-skipped retraining session."""
    units = [s.train_units for s in trace.sessions if not s.skipped]
    if not units:
        return None
    return float(np.mean(units))


def windowed_accuracy(trace: RunTrace, window: float = WINDOW_SECONDS) -> list[WindowPoint]:
    if not window > 0.0:
        raise ValueError("window must be > 0")
    n_windows = max(1, math.ceil(trace.horizon / window))
    counts = [0] * n_windows
    corrects = [0] * n_windows
    for rec in trace.items:
        b = min(int(rec.arrival_time / window), n_windows - 1)
        counts[b] += 1
        if rec.correct:
            corrects[b] += 1
    return [
        WindowPoint(start=i * window, count=counts[i], correct=corrects[i])
        for i in range(n_windows)
    ]


def per_segment_accuracy(trace: RunTrace, script: StreamScript) -> list[SegmentAccuracy]:
    n_seg = len(script.segments)
    counts = [0] * n_seg
    corrects = [0] * n_seg
    for rec in trace.items:
        idx = script.segment_index_at(rec.arrival_time)
        counts[idx] += 1
        if rec.correct:
            corrects[idx] += 1
    return [
        SegmentAccuracy(
            segment_index=i,
            scene_id=script.segments[i][0].scene_id,
            count=counts[i],
            correct=corrects[i],
        )
        for i in range(n_seg)
    ]


def scene_centroid_distances(trace: RunTrace) -> list[tuple[int, float]]:
    """Cosine distance between consecutive rounds' period centroids."""
    out: list[tuple[int, float]] = []
    prev: np.ndarray | None = None
    for info in trace.rounds:
        cur = info.period_centroid
        if cur is None:
            continue
        if (
            prev is not None
            and float(np.linalg.norm(prev)) > 0.0
            and float(np.linalg.norm(cur)) > 0.0
        ):
            out.append((info.round_index, 1.0 - cosine_similarity(prev, cur)))
        prev = cur
    return out


def base_specialized_distances(
    trace: RunTrace, probes: np.ndarray
) -> list[tuple[int, float]]:
    """Probe distance between the pre-update base and each deployed ζ."""
    out: list[tuple[int, float]] = []
    for info in trace.rounds:
        if info.base_updated and info.phi_before is not None and info.zeta is not None:
            out.append(
                (info.round_index, probe_distance(info.phi_before, info.zeta, probes))
            )
    return out


def convergence_round(trace: RunTrace, epoch_threshold: int = 5) -> int | None:
    """First round whose session halted early within the epoch threshold."""
    for session in trace.sessions:
        if session.skipped:
            continue
        if session.halted_early and session.epochs_run <= epoch_threshold:
            return session.round_index
    return None


def compute_metrics(
    trace: RunTrace,
    script: StreamScript,
    probes: np.ndarray,
    convergence_epochs: int = 5,
) -> MetricsReport:
    report = MetricsReport(
        policy=trace.policy_id.value,
        seed=trace.seed,
        generated=trace.generated,
        served=trace.served,
        overall_accuracy=overall_accuracy(trace),
        served_accuracy=served_accuracy(trace),
        training_time=training_time(trace),
        training_fraction=training_fraction(trace),
        selection_time=selection_time(trace),
        label_total=trace.ledger.total,
        overloaded=trace.overloaded,
        convergence_round=convergence_round(trace, convergence_epochs),
        windowed=windowed_accuracy(trace),
        segments=per_segment_accuracy(trace, script),
        scene_distances=scene_centroid_distances(trace),
        base_distances=base_specialized_distances(trace, probes),
    )
    if not 0.0 <= report.overall_accuracy <= 1.0:
        raise AssertionError("overall accuracy out of [0, 1]")
    if not 0.0 <= report.training_fraction <= 1.0 + 1e-12:
        raise AssertionError("training fraction out of [0, 1]")
    return report
