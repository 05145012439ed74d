"""Synthetic drifting data streams.

A scene is a Gaussian mixture: one centroid per class, isotropic noise,
and a class prior.  Scenes belong to structural families: every scene
in a family is the family's shared "backbone" centroid layout plus a
small per-scene offset, so models trained on one family member transfer
partially to the others.  A stream script is a timed sequence of scenes
sampled on a fixed-rate arrival grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .seeding import seed_sequence

_FAMILY_SALT = 0x5CE11E
_BACKBONE_TRIES = 64


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


def _min_pairwise(points: np.ndarray) -> float:
    n = points.shape[0]
    if n < 2:
        return math.inf
    diffs = points[:, None, :] - points[None, :, :]
    dists = np.sqrt((diffs * diffs).sum(axis=2))
    return float(dists[np.triu_indices(n, k=1)].min())


@dataclass(frozen=True, eq=False)
class SceneSpec:
    """One stationary data distribution."""

    scene_id: int
    family_id: int
    centroids: np.ndarray
    noise: float
    priors: np.ndarray

    def __post_init__(self) -> None:
        cents = np.ascontiguousarray(self.centroids, dtype=np.float64)
        if cents.ndim != 2 or cents.shape[0] < 2:
            raise ValueError("centroids must be a (num_classes >= 2, dim) matrix")
        if not np.isfinite(cents).all():
            raise ValueError("centroids contain non-finite values")
        pri = np.ascontiguousarray(self.priors, dtype=np.float64)
        if pri.shape != (cents.shape[0],):
            raise ValueError("priors length must equal the number of classes")
        if np.any(pri < 0.0) or abs(float(pri.sum()) - 1.0) > 1e-9:
            raise ValueError("priors must be a probability vector")
        if not (math.isfinite(self.noise) and self.noise >= 0.0):
            raise ValueError("noise must be finite and >= 0")
        object.__setattr__(self, "centroids", _freeze(cents))
        object.__setattr__(self, "priors", _freeze(pri))

    @property
    def num_classes(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


@dataclass(frozen=True, eq=False)
class DataItem:
    """One stream arrival."""

    features: np.ndarray
    label: int
    arrival_time: float
    scene_id: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", _freeze(self.features))


@dataclass(frozen=True, eq=False)
class StreamScript:
    """Timed scene sequence plus a fixed arrival rate (items per second)."""

    segments: tuple[tuple[SceneSpec, float], ...]
    rate: float

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("script needs at least one segment")
        if not (math.isfinite(self.rate) and self.rate > 0.0):
            raise ValueError("rate must be finite and > 0")
        dims = set()
        classes = set()
        for scene, duration in self.segments:
            if not (math.isfinite(duration) and duration > 0.0):
                raise ValueError("segment durations must be finite and > 0")
            dims.add(scene.dim)
            classes.add(scene.num_classes)
        if len(dims) != 1 or len(classes) != 1:
            raise ValueError("all scenes in a script must share dim and num_classes")
        object.__setattr__(self, "segments", tuple((s, float(d)) for s, d in self.segments))

    @property
    def total_duration(self) -> float:
        return float(sum(d for _, d in self.segments))

    @property
    def segment_starts(self) -> np.ndarray:
        durations = [d for _, d in self.segments]
        return np.concatenate([[0.0], np.cumsum(durations)[:-1]])

    def segment_index_at(self, t: float) -> int:
        """Segment active at time t: the latest segment with start <= t."""
        if not (0.0 <= t < self.total_duration):
            raise ValueError(f"t={t} outside [0, {self.total_duration})")
        starts = self.segment_starts
        return int(np.searchsorted(starts, t, side="right")) - 1

    def scene_at(self, t: float) -> SceneSpec:
        return self.segments[self.segment_index_at(t)][0]


def _family_backbone(
    family_id: int, num_classes: int, dim: int, min_dist: float
) -> np.ndarray:
    """Shared centroid layout for a family, min pairwise distance >= min_dist.

    Seeded purely by (family, shape, spacing): every scene of the family
    reconstructs the identical layout.  Rejection-sampled with a slowly
    growing scale; genuinely cramped requests still fail after the
    bounded number of tries.
    """
    ss = seed_sequence(
        _FAMILY_SALT, "family", family_id, num_classes, dim, repr(float(min_dist))
    )
    rng = np.random.default_rng(ss)
    scale = max(min_dist, 1.0)
    for attempt in range(_BACKBONE_TRIES):
        pts = rng.normal(0.0, scale, size=(num_classes, dim))
        if _min_pairwise(pts) >= min_dist:
            return pts
        if attempt % 8 == 7:
            scale *= 1.25
    raise ValueError(
        f"could not place {num_classes} centroids in {dim}-d with spacing {min_dist}"
    )


def make_scene(
    seed: int,
    num_classes: int,
    dim: int,
    separation: float,
    noise: float,
    family_id: int,
    *,
    jitter: float | None = None,
    scene_id: int | None = None,
) -> SceneSpec:
    """Seeded scene with class centroids at least `separation` apart.

    The centroid layout is the family backbone plus a per-scene offset
    of exact norm `jitter` per class (default separation / 4); priors
    are a seeded Dirichlet draw.  Same seed, same scene, bit for bit.
    """
    if num_classes < 2:
        raise ValueError("num_classes must be >= 2")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not (math.isfinite(separation) and separation > 0.0):
        raise ValueError("separation must be finite and > 0")
    if not (math.isfinite(noise) and noise >= 0.0):
        raise ValueError("noise must be finite and >= 0")
    if jitter is None:
        jitter = separation / 4.0
    if not (math.isfinite(jitter) and jitter >= 0.0):
        raise ValueError("jitter must be finite and >= 0")

    backbone = _family_backbone(family_id, num_classes, dim, separation + 2.0 * jitter)
    rng = np.random.default_rng(seed_sequence(int(seed), "scene"))
    if jitter > 0.0:
        raw = rng.standard_normal((num_classes, dim))
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        offsets = raw * (jitter / norms)
    else:
        offsets = np.zeros((num_classes, dim))
    centroids = backbone + offsets
    if _min_pairwise(centroids) < separation - 1e-9:
        raise ValueError("scene violates the separation requirement")
    priors = rng.dirichlet(np.full(num_classes, 4.0))
    return SceneSpec(
        scene_id=int(seed) if scene_id is None else int(scene_id),
        family_id=int(family_id),
        centroids=centroids,
        noise=float(noise),
        priors=priors,
    )


def perturb_scene(
    scene: SceneSpec,
    drift_magnitude: float,
    seed: int,
    *,
    scene_id: int | None = None,
) -> SceneSpec:
    """Drifted copy: each centroid translated by an exact-norm random vector.

    Priors are re-drawn by jittering their logits with scale
    `drift_magnitude`.  Magnitude 0 returns the scene unchanged (apart
    from an optional new id).  The family is preserved; note drift can
    shrink class separation.
    """
    if not (math.isfinite(drift_magnitude) and drift_magnitude >= 0.0):
        raise ValueError("drift_magnitude must be finite and >= 0")
    new_id = scene.scene_id if scene_id is None else int(scene_id)
    if drift_magnitude == 0.0:
        return replace(scene, scene_id=new_id)
    rng = np.random.default_rng(seed_sequence(int(seed), "perturb"))
    raw = rng.standard_normal(scene.centroids.shape)
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    shifts = raw * (drift_magnitude / norms)
    logits = np.log(scene.priors + 1e-12) + drift_magnitude * rng.standard_normal(
        scene.num_classes
    )
    logits -= logits.max()
    exp = np.exp(logits)
    return SceneSpec(
        scene_id=new_id,
        family_id=scene.family_id,
        centroids=scene.centroids + shifts,
        noise=scene.noise,
        priors=exp / exp.sum(),
    )


def sample_stream(script: StreamScript, seed: int) -> list[DataItem]:
    """All arrivals of a script on the grid t_i = i / rate.

    Draws are consumed segment by segment, so appending a segment to a
    script leaves every earlier item bit-identical.  Arrival times are
    strictly increasing; an arrival exactly on a boundary belongs to
    the newly started scene.
    """
    rng = np.random.default_rng(seed_sequence(int(seed), "stream"))
    n_total = round(script.rate * script.total_duration)
    times = np.arange(n_total) / script.rate
    starts = script.segment_starts
    seg_of = np.searchsorted(starts, times, side="right") - 1
    items: list[DataItem] = []
    for seg_idx, (scene, _) in enumerate(script.segments):
        mask = seg_of == seg_idx
        count = int(mask.sum())
        if count == 0:
            continue
        seg_times = times[mask]
        cum = np.cumsum(scene.priors)
        cum[-1] = 1.0
        u = rng.random(count)
        labels = np.searchsorted(cum, u, side="right").astype(np.int64)
        noise = rng.standard_normal((count, scene.dim))
        feats = scene.centroids[labels] + scene.noise * noise
        for j in range(count):
            items.append(
                DataItem(
                    features=feats[j],
                    label=int(labels[j]),
                    arrival_time=float(seg_times[j]),
                    scene_id=scene.scene_id,
                )
            )
    return items


def stitched_script(
    segments: Sequence[tuple[str, float]],
    scenes: Mapping[str, SceneSpec],
    rate: float,
) -> StreamScript:
    """Script built from named scenes; repeated tags reuse the same object."""
    built = []
    for tag, duration in segments:
        if tag not in scenes:
            raise KeyError(f"unknown scene tag {tag!r}; known: {sorted(scenes)}")
        built.append((scenes[tag], float(duration)))
    return StreamScript(segments=tuple(built), rate=float(rate))


def write_stream_csv(items: Sequence[DataItem], path: str) -> None:
    """Dump items as CSV: time, scene_id, label, f0..f{dim-1}."""
    if not items:
        raise ValueError("no items to write")
    dim = items[0].features.shape[0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "scene_id", "label"] + [f"f{i}" for i in range(dim)])
        for item in items:
            writer.writerow(
                [repr(item.arrival_time), item.scene_id, item.label]
                + [repr(float(v)) for v in item.features]
            )
