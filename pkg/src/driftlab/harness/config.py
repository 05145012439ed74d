"""Experiment configuration: TOML loading, validation, stream building.

A config file is the single source of truth for an experiment; the
only environment overrides honored anywhere are DRIFTLAB_OUT (output
directory) and DRIFTLAB_SEEDS (comma-separated seed list), applied by
the CLI.  Every value is validated eagerly with a pointed diagnostic
so a bad config never reaches the simulator.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..meta import EwmaPolicy
from ..model import ModelConfig
from ..policies import PolicyId
from ..sampler import SamplerConfig
from ..scheduler import CostModel, StoppingParams, TrainParams
from ..seeding import rng_for
from ..stream import SceneSpec, StreamScript, make_scene, perturb_scene

SCRIPT_FORMAT_VERSION = 1


class ConfigError(ValueError):
    """Invalid experiment configuration; message says which key and why."""


@dataclass(frozen=True)
class StreamSpec:
    """Recipe for building a per-seed StreamScript.

    kind "stitched": a base scene plus perturbed variants arranged by
    `pattern` (tags "S1", "S2", ...; every non-S1 tag is a drifted copy
    of S1).  kind "family-walk": `num_scenes` same-family scenes in a
    row.  kind "file": load a serialized script and use it verbatim
    for every seed.  For generated kinds the scene geometry is derived
    from both `scene_seed` and the run seed, so different run seeds
    see different geometry while all arms stay paired.
    """

    kind: str = "stitched"
    rate: float = 10.0
    separation: float = 4.0
    noise: float = 0.7
    jitter: float | None = None
    drift_magnitude: float = 1.5
    segment_duration: float = 30.0
    pattern: tuple[str, ...] = ("S1", "S2", "S1", "S3", "S3")
    num_scenes: int = 20
    scene_seed: int = 101
    family_id: int = 7
    path: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("stitched", "family-walk", "file"):
            raise ConfigError(
                f"stream.kind must be 'stitched', 'family-walk' or 'file', got {self.kind!r}"
            )
        if not (math.isfinite(self.rate) and self.rate > 0.0):
            raise ConfigError("stream.rate must be finite and > 0")
        if not self.separation > 0.0:
            raise ConfigError("stream.separation must be > 0")
        if self.noise < 0.0:
            raise ConfigError("stream.noise must be >= 0")
        if self.jitter is not None and self.jitter < 0.0:
            raise ConfigError("stream.jitter must be >= 0")
        if self.drift_magnitude < 0.0:
            raise ConfigError("stream.drift_magnitude must be >= 0")
        if not self.segment_duration > 0.0:
            raise ConfigError("stream.segment_duration must be > 0")
        if self.kind == "stitched" and not self.pattern:
            raise ConfigError("stream.pattern must not be empty")
        if self.kind == "stitched":
            for tag in self.pattern:
                if not (
                    len(tag) >= 2
                    and tag[0] == "S"
                    and tag[1:].isdigit()
                    and int(tag[1:]) >= 1
                ):
                    raise ConfigError(f"stream.pattern tags look like 'S1'; got {tag!r}")
        if self.kind == "family-walk" and self.num_scenes < 1:
            raise ConfigError("stream.num_scenes must be >= 1")
        if self.kind == "file" and not self.path:
            raise ConfigError("stream.path is required when stream.kind = 'file'")


def build_script(
    spec: StreamSpec, model: ModelConfig, run_seed: int
) -> StreamScript:
    """Materialize the per-seed script a StreamSpec describes."""
    if spec.kind == "file":
        assert spec.path is not None
        return load_script(spec.path)
    geom = rng_for(spec.scene_seed, "geometry", run_seed)
    family = int(geom.integers(1, 2**31 - 1))
    base_seed = int(geom.integers(1, 2**31 - 1))
    if spec.kind == "stitched":
        anchor = make_scene(
            base_seed,
            model.num_classes,
            model.input_dim,
            spec.separation,
            spec.noise,
            family,
            jitter=spec.jitter,
            scene_id=1,
        )
        scenes: dict[str, SceneSpec] = {"S1": anchor}
        for tag in sorted(set(spec.pattern), key=lambda t: int(t[1:])):
            idx = int(tag[1:])
            if tag not in scenes:
                scenes[tag] = perturb_scene(
                    anchor,
                    spec.drift_magnitude,
                    base_seed + idx,
                    scene_id=idx,
                )
        segments = tuple(
            (scenes[tag], spec.segment_duration) for tag in spec.pattern
        )
        return StreamScript(segments=segments, rate=spec.rate)
    segments = tuple(
        (
            make_scene(
                base_seed + k,
                model.num_classes,
                model.input_dim,
                spec.separation,
                spec.noise,
                family,
                jitter=spec.jitter,
                scene_id=k,
            ),
            spec.segment_duration,
        )
        for k in range(1, spec.num_scenes + 1)
    )
    return StreamScript(segments=segments, rate=spec.rate)


def continue_walk(
    spec: StreamSpec,
    model: ModelConfig,
    run_seed: int,
    count: int,
    start_index: int,
) -> StreamScript:
    """Further same-family scenes for a seed's walk (ids keep counting).

    Used by protocols that need unseen scenes from the same family as
    build_script's walk: scene k here equals what a longer walk would
    have produced at position k.
    """
    if spec.kind != "family-walk":
        raise ConfigError("continue_walk requires a family-walk stream spec")
    geom = rng_for(spec.scene_seed, "geometry", run_seed)
    family = int(geom.integers(1, 2**31 - 1))
    base_seed = int(geom.integers(1, 2**31 - 1))
    segments = tuple(
        (
            make_scene(
                base_seed + k,
                model.num_classes,
                model.input_dim,
                spec.separation,
                spec.noise,
                family,
                jitter=spec.jitter,
                scene_id=k,
            ),
            spec.segment_duration,
        )
        for k in range(start_index, start_index + count)
    )
    return StreamScript(segments=segments, rate=spec.rate)


@dataclass(frozen=True)
class ArmSpec:
    """One run variant inside an experiment.

    capacity_factor scales the shared cost model's capacity; sampler
    picks the candidate buffer ("diversity" or "uniform"); label_budget
    caps per-round selections; epoch_budget, when set, replaces the
    policy's stopping rule with a fixed epoch count.
    """

    name: str
    policy: PolicyId
    sampler: str = "diversity"
    label_budget: int | None = None
    epoch_budget: int | None = None
    capacity_factor: float = 1.0

    def __post_init__(self) -> None:
        if not self.name or "/" in self.name or self.name != self.name.strip():
            raise ConfigError(f"arm name {self.name!r} must be a clean directory name")
        if self.sampler not in ("diversity", "uniform"):
            raise ConfigError("arm sampler must be 'diversity' or 'uniform'")
        if self.label_budget is not None and self.label_budget < 1:
            raise ConfigError("arm label_budget must be >= 1 when set")
        if self.epoch_budget is not None and self.epoch_budget < 0:
            raise ConfigError("arm epoch_budget must be >= 0 when set")
        if not self.capacity_factor > 0.0:
            raise ConfigError("arm capacity_factor must be > 0")


@dataclass(frozen=True)
class ProtocolSpec:
    """Knobs for the two special experiment protocols.

    rampup: train-from-base vs train-from-previous on one fresh scene.
    base-convergence: fresh vs reused base across two same-family walks.
    """

    kind: str = "standard"
    rampup_items: int = 48
    rampup_epochs: int = 40
    rampup_learning_rate: float | None = None
    convergence_epochs: int = 5

    def __post_init__(self) -> None:
        if self.kind not in ("standard", "rampup", "base-convergence"):
            raise ConfigError(
                "protocol.kind must be 'standard', 'rampup' or 'base-convergence'"
            )
        if self.rampup_items < 4:
            raise ConfigError("protocol.rampup_items must be >= 4")
        if self.rampup_epochs < 1:
            raise ConfigError("protocol.rampup_epochs must be >= 1")
        if self.rampup_learning_rate is not None and self.rampup_learning_rate <= 0:
            raise ConfigError("protocol.rampup_learning_rate must be > 0")
        if self.convergence_epochs < 1:
            raise ConfigError("protocol.convergence_epochs must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs, validated."""

    name: str
    model: ModelConfig
    stream: StreamSpec
    arms: tuple[ArmSpec, ...]
    seeds: tuple[int, ...]
    cost: CostModel = field(default_factory=CostModel)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    stopping: StoppingParams = field(default_factory=StoppingParams)
    ewma: EwmaPolicy = field(default_factory=EwmaPolicy)
    train: TrainParams = field(default_factory=TrainParams)
    protocol: ProtocolSpec = field(default_factory=ProtocolSpec)
    retrain_period: float = 30.0
    horizon: float | None = None
    out_dir: str = "runs"

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("name must not be empty")
        if not self.arms:
            raise ConfigError("at least one arm is required")
        names = [arm.name for arm in self.arms]
        if len(set(names)) != len(names):
            raise ConfigError("arm names must be unique")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be unique")
        if not (math.isfinite(self.retrain_period) and self.retrain_period > 0.0):
            raise ConfigError("retrain_period must be finite and > 0")
        if self.horizon is not None and not self.horizon > 0.0:
            raise ConfigError("horizon must be > 0 when set")


def _section(data: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    value = data.get(key, {})
    if not isinstance(value, Mapping):
        raise ConfigError(f"[{key}] must be a table")
    return value


def _build(cls, section: Mapping[str, Any], where: str):
    try:
        return cls(**section)
    except ConfigError:
        raise
    except TypeError as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc


def config_from_dict(data: Mapping[str, Any]) -> ExperimentConfig:
    """Validate a parsed TOML mapping into an ExperimentConfig."""
    known_top = {
        "name", "seeds", "retrain_period", "horizon", "out_dir",
        "model", "stream", "cost", "sampler", "stopping", "ewma",
        "train", "protocol", "arms",
    }
    unknown = set(data) - known_top
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if "name" not in data:
        raise ConfigError("top-level 'name' is required")
    if "model" not in data:
        raise ConfigError("[model] section is required")
    if "arms" not in data or not isinstance(data["arms"], list) or not data["arms"]:
        raise ConfigError("at least one [[arms]] entry is required")

    model = _build(ModelConfig, _section(data, "model"), "model")
    stream_raw = dict(_section(data, "stream"))
    if "pattern" in stream_raw:
        stream_raw["pattern"] = tuple(str(t) for t in stream_raw["pattern"])
    stream = _build(StreamSpec, stream_raw, "stream")
    cost = _build(CostModel, _section(data, "cost"), "cost")
    sampler = _build(SamplerConfig, _section(data, "sampler"), "sampler")
    stopping = _build(StoppingParams, _section(data, "stopping"), "stopping")
    ewma = _build(EwmaPolicy, _section(data, "ewma"), "ewma")
    train = _build(TrainParams, _section(data, "train"), "train")
    protocol = _build(ProtocolSpec, _section(data, "protocol"), "protocol")

    arms = []
    for i, raw in enumerate(data["arms"]):
        if not isinstance(raw, Mapping):
            raise ConfigError(f"[[arms]] entry {i} must be a table")
        raw = dict(raw)
        if "policy" not in raw:
            raise ConfigError(f"[[arms]] entry {i} needs a 'policy'")
        try:
            raw["policy"] = PolicyId(raw["policy"])
        except ValueError:
            valid = ", ".join(p.value for p in PolicyId)
            raise ConfigError(
                f"[[arms]] entry {i}: unknown policy {raw['policy']!r}; valid: {valid}"
            ) from None
        arms.append(_build(ArmSpec, raw, f"arms[{i}]"))

    seeds = data.get("seeds", [1])
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("'seeds' must be a list of integers")

    return ExperimentConfig(
        name=str(data["name"]),
        model=model,
        stream=stream,
        arms=tuple(arms),
        seeds=tuple(int(s) for s in seeds),
        cost=cost,
        sampler=sampler,
        stopping=stopping,
        ewma=ewma,
        train=train,
        protocol=protocol,
        retrain_period=float(data.get("retrain_period", 30.0)),
        horizon=(None if data.get("horizon") is None else float(data["horizon"])),
        out_dir=str(data.get("out_dir", "runs")),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a TOML experiment file."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error in {p}: {exc}") from exc
    return config_from_dict(data)


def save_script(script: StreamScript, path: str | Path) -> None:
    """Serialize a script (scenes, segments, rate) to JSON."""
    scenes: dict[int, SceneSpec] = {}
    for scene, _ in script.segments:
        scenes[scene.scene_id] = scene
    payload = {
        "format_version": SCRIPT_FORMAT_VERSION,
        "rate": script.rate,
        "scenes": {
            str(sid): {
                "scene_id": s.scene_id,
                "family_id": s.family_id,
                "noise": s.noise,
                "centroids": [[float(v) for v in row] for row in s.centroids],
                "priors": [float(v) for v in s.priors],
            }
            for sid, s in scenes.items()
        },
        "segments": [
            [scene.scene_id, float(duration)] for scene, duration in script.segments
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True))


def load_script(path: str | Path) -> StreamScript:
    """Load a script serialized by save_script."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"script file not found: {p}")
    try:
        payload = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"script file {p} is not valid JSON: {exc}") from exc
    if payload.get("format_version") != SCRIPT_FORMAT_VERSION:
        raise ConfigError(
            f"script file {p} has format_version {payload.get('format_version')}, "
            f"expected {SCRIPT_FORMAT_VERSION}"
        )
    scenes = {
        int(sid): SceneSpec(
            scene_id=int(raw["scene_id"]),
            family_id=int(raw["family_id"]),
            centroids=np.asarray(raw["centroids"], dtype=np.float64),
            noise=float(raw["noise"]),
            priors=np.asarray(raw["priors"], dtype=np.float64),
        )
        for sid, raw in payload["scenes"].items()
    }
    segments = tuple(
        (scenes[int(sid)], float(duration)) for sid, duration in payload["segments"]
    )
    return StreamScript(segments=segments, rate=float(payload["rate"]))
