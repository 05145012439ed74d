"""Experiment execution and file emission.

One experiment = arms x seeds, each run fully isolated and seeded.
Every run directory gets the same six files (summary.json, items.csv,
timeline.csv, sessions.csv, sampler.csv, centroids.csv); the
experiment root aggregates runs.csv and segments.csv plus any
protocol-specific files.  All output is deterministic: floats are
written with repr (shortest round-trip), JSON keys are sorted, and no
timestamps or machine state leak in.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..meta import BaseModelState
from ..model import ModelWeights
from ..policies import POLICIES, PolicySpec
from ..probes import probe_distance, probe_features
from ..scheduler import (
    RunConfig,
    RunTrace,
    StoppingParams,
    TrainParams,
    retrain_with_early_stop,
    run_pipeline,
)
from ..seeding import rng_for
from ..stream import DataItem, StreamScript, sample_stream
from .config import ArmSpec, ExperimentConfig, build_script, continue_walk
from .metrics import (
    MetricsReport,
    compute_metrics,
    mean_session_train_units,
    scene_centroid_distances,
)

SCHEMA_VERSION = 1

ITEMS_COLUMNS = (
    "index", "arrival_time", "scene_id", "true_label",
    "served_time", "predicted", "correct", "lane", "model",
)
TIMELINE_COLUMNS = ("start", "end", "tag", "note")
SESSIONS_COLUMNS = (
    "round", "trigger_time", "start_time", "end_time", "selected",
    "n_train", "n_holdout", "init_source", "early_stop", "epoch_cap",
    "skipped", "skip_reason", "truncated", "halted_early",
    "initial_accuracy", "epoch", "accuracy", "delta_acc",
    "delta_acc_max", "drift", "drift_max", "score", "halted",
)
SAMPLER_COLUMNS = (
    "round", "trigger_time", "offered", "accepted", "selected",
    "threshold_first", "threshold_last",
)
CENTROIDS_COLUMNS = (
    "round", "trigger_time", "period_scene_id", "deployed", "base_updated",
    "similarity", "epsilon", "scene_distance", "base_spec_distance",
)
RUNS_COLUMNS = (
    "arm", "policy", "seed", "capacity_factor", "sampler", "label_budget",
    "epoch_budget", "generated", "served", "overall_accuracy",
    "served_accuracy", "training_time", "training_fraction",
    "selection_time", "mean_session_train_units", "label_total",
    "convergence_round", "overloaded",
)
SEGMENTS_COLUMNS = (
    "arm", "policy", "seed", "segment_index", "scene_id",
    "count", "correct", "accuracy",
)
RAMPUP_COLUMNS = ("seed", "arm", "epoch", "accuracy")
CONVERGENCE_COLUMNS = (
    "seed", "arm", "convergence_round", "rounds_total", "sessions_run",
)
DISTANCES_COLUMNS = ("seed", "round", "scene_id", "distance")

RUN_FILES = (
    "summary.json", "items.csv", "timeline.csv",
    "sessions.csv", "sampler.csv", "centroids.csv",
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(columns)]
    for row in rows:
        cells = [_cell(v) for v in row]
        for cell in cells:
            if "," in cell or "\n" in cell or '"' in cell:
                raise ValueError(f"cell needs quoting, refusing: {cell!r}")
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def arm_policy_spec(arm: ArmSpec) -> PolicySpec:
    """Policy spec an arm runs: the policy's knobs plus arm overrides."""
    spec = POLICIES[arm.policy]
    if arm.epoch_budget is not None:
        spec = replace(spec, stopping="budget", fixed_epoch_budget=arm.epoch_budget)
    return spec


def arm_run_config(
    config: ExperimentConfig,
    arm: ArmSpec,
    *,
    initial_base: BaseModelState | None = None,
    initial_weights: ModelWeights | None = None,
) -> RunConfig:
    return RunConfig(
        model=config.model,
        sampler=config.sampler,
        stopping=config.stopping,
        ewma=config.ewma,
        train=config.train,
        retrain_period=config.retrain_period,
        label_budget=arm.label_budget,
        sampler_kind=arm.sampler,
        horizon=config.horizon,
        initial_base=initial_base,
        initial_weights=initial_weights,
    )


def write_run_outputs(
    run_dir: Path,
    trace: RunTrace,
    report: MetricsReport,
    probes: np.ndarray,
) -> None:
    """Emit the six per-run files into run_dir."""
    run_dir.mkdir(parents=True, exist_ok=True)

    _write_csv(
        run_dir / "items.csv",
        ITEMS_COLUMNS,
        (
            (
                r.index, r.arrival_time, r.scene_id, r.true_label,
                r.served_time, r.predicted, r.correct, r.lane, r.model,
            )
            for r in trace.items
        ),
    )
    _write_csv(
        run_dir / "timeline.csv",
        TIMELINE_COLUMNS,
        ((iv.start, iv.end, iv.tag, iv.note) for iv in trace.timeline),
    )

    session_rows = []
    for s in trace.sessions:
        head = (
            s.round_index, s.trigger_time, s.start_time, s.end_time,
            s.selected_size, s.n_train, s.n_holdout, s.init_source,
            s.early_stop_enabled, s.epoch_cap, s.skipped, s.skip_reason,
            s.truncated, s.halted_early, s.initial_accuracy,
        )
        if s.records:
            for rec in s.records:
                session_rows.append(
                    head
                    + (
                        rec.epoch, rec.accuracy, rec.delta_acc,
                        rec.delta_acc_max, rec.drift, rec.drift_max,
                        rec.score, rec.halted,
                    )
                )
        else:
            session_rows.append(head + (None,) * 8)
    _write_csv(run_dir / "sessions.csv", SESSIONS_COLUMNS, session_rows)

    _write_csv(
        run_dir / "sampler.csv",
        SAMPLER_COLUMNS,
        (
            (
                info.round_index, info.trigger_time, info.offered,
                info.accepted, info.selected,
                info.threshold_first, info.threshold_last,
            )
            for info in trace.rounds
        ),
    )

    scene_dist = dict(scene_centroid_distances(trace))
    centroid_rows = []
    for info in trace.rounds:
        base_dist = None
        if info.base_updated and info.phi_before is not None and info.zeta is not None:
            base_dist = probe_distance(info.phi_before, info.zeta, probes)
        centroid_rows.append(
            (
                info.round_index, info.trigger_time, info.period_scene_id,
                info.deployed, info.base_updated, info.similarity,
                info.epsilon, scene_dist.get(info.round_index), base_dist,
            )
        )
    _write_csv(run_dir / "centroids.csv", CENTROIDS_COLUMNS, centroid_rows)

    payload = report.to_dict()
    payload["schema_version"] = SCHEMA_VERSION
    _write_json(run_dir / "summary.json", payload)


def _config_echo(config: ExperimentConfig) -> dict:
    """JSON-safe echo of the semantic config (out_dir excluded)."""

    def plain(obj):
        if hasattr(obj, "__dataclass_fields__"):
            return {
                k: plain(getattr(obj, k))
                for k in sorted(obj.__dataclass_fields__)
            }
        if isinstance(obj, (list, tuple)):
            return [plain(v) for v in obj]
        if isinstance(obj, (str, int, float, bool)) or obj is None:
            return obj
        return str(obj)

    return {
        "schema_version": SCHEMA_VERSION,
        "name": config.name,
        "model": plain(config.model),
        "stream": plain(config.stream),
        "arms": plain(config.arms),
        "seeds": list(config.seeds),
        "cost": plain(config.cost),
        "sampler": plain(config.sampler),
        "stopping": plain(config.stopping),
        "ewma": plain(config.ewma),
        "train": plain(config.train),
        "protocol": plain(config.protocol),
        "retrain_period": config.retrain_period,
        "horizon": config.horizon,
    }


@dataclass(eq=False)
class ExperimentResult:
    """Where an experiment wrote its files, plus the root summary."""

    root: Path
    summary: dict


def _run_one(
    config: ExperimentConfig,
    arm: ArmSpec,
    seed: int,
    probes: np.ndarray,
    *,
    script: StreamScript | None = None,
    initial_base: BaseModelState | None = None,
    initial_weights: ModelWeights | None = None,
) -> tuple[RunTrace, MetricsReport, StreamScript]:
    if script is None:
        script = build_script(config.stream, config.model, seed)
    spec = arm_policy_spec(arm)
    cost = config.cost.scaled(arm.capacity_factor)
    run_cfg = arm_run_config(
        config, arm, initial_base=initial_base, initial_weights=initial_weights
    )
    trace = run_pipeline(script, spec, cost, seed, run_cfg)
    report = compute_metrics(
        trace, script, probes, config.protocol.convergence_epochs
    )
    return trace, report, script


def _runs_row(arm: ArmSpec, report: MetricsReport, trace: RunTrace) -> tuple:
    return (
        arm.name, arm.policy.value, report.seed, arm.capacity_factor,
        arm.sampler, arm.label_budget, arm.epoch_budget, report.generated,
        report.served, report.overall_accuracy, report.served_accuracy,
        report.training_time, report.training_fraction, report.selection_time,
        mean_session_train_units(trace), report.label_total,
        report.convergence_round, report.overloaded,
    )


def _segment_rows(arm: ArmSpec, report: MetricsReport) -> list[tuple]:
    return [
        (
            arm.name, arm.policy.value, report.seed, s.segment_index,
            s.scene_id, s.count, s.correct, s.accuracy,
        )
        for s in report.segments
    ]


def run_standard(config: ExperimentConfig, root: Path) -> dict:
    probes = probe_features(config.model)
    runs_rows: list[tuple] = []
    segment_rows: list[tuple] = []
    accuracies: dict[str, list[float]] = {}
    for arm in config.arms:
        for seed in config.seeds:
            trace, report, _ = _run_one(config, arm, seed, probes)
            run_dir = root / arm.name / f"seed-{seed}"
            write_run_outputs(run_dir, trace, report, probes)
            runs_rows.append(_runs_row(arm, report, trace))
            segment_rows.extend(_segment_rows(arm, report))
            accuracies.setdefault(arm.name, []).append(report.overall_accuracy)
    _write_csv(root / "runs.csv", RUNS_COLUMNS, runs_rows)
    _write_csv(root / "segments.csv", SEGMENTS_COLUMNS, segment_rows)
    return {
        "runs": len(runs_rows),
        "median_overall_accuracy": {
            name: float(np.median(vals)) for name, vals in sorted(accuracies.items())
        },
    }


def _epochs_to_fraction_of_plateau(
    initial_accuracy: float, epoch_accuracies: Sequence[float], fraction: float = 0.9
) -> int:
    """Epochs until holdout accuracy first reaches fraction x its own max.

    Epoch 0 is the pre-training accuracy; if that already clears the
    target, the answer is 0.
    """
    curve = [initial_accuracy] + list(epoch_accuracies)
    target = fraction * max(curve)
    for i, acc in enumerate(curve):
        if acc >= target:
            return i
    raise AssertionError("the plateau itself must reach the target")


def _fresh_scene_items(
    config: ExperimentConfig, seed: int, count: int
) -> list[DataItem]:
    """Ground-truth-labeled items from one unseen same-family scene."""
    solo = continue_walk(
        config.stream, config.model, seed,
        count=1, start_index=config.stream.num_scenes + 1,
    )
    draw_seed = int(rng_for(seed, "rampup-draw").integers(1, 2**31 - 1))
    items = sample_stream(solo, draw_seed)
    if len(items) < count:
        raise ValueError(
            f"fresh scene yields {len(items)} items, need {count}; "
            "increase segment_duration or rate"
        )
    return items[:count]


def run_rampup(config: ExperimentConfig, root: Path) -> dict:
    """Fig-13-analog protocol: from-base vs from-previous ramp-up.

    Per seed: run the production policy over the walk to obtain a
    converged base and a last specialized model, then fit one fresh
    same-family scene twice from the two initializations, with early
    stopping off, the same items, and the same shuffle stream.  Emits
    rampup.csv with both per-epoch curves.
    """
    probes = probe_features(config.model)
    arm = config.arms[0]
    curve_rows: list[tuple] = []
    per_seed: list[dict] = []
    runs_rows: list[tuple] = []
    for seed in config.seeds:
        trace, report, _ = _run_one(config, arm, seed, probes)
        write_run_outputs(root / arm.name / f"seed-{seed}", trace, report, probes)
        runs_rows.append(_runs_row(arm, report, trace))
        if trace.base_final is None:
            raise AssertionError("rampup protocol needs a base-keeping policy")

        items = _fresh_scene_items(config, seed, config.protocol.rampup_items)
        ramp_stopping = StoppingParams(
            w1=config.stopping.w1,
            w2=config.stopping.w2,
            tau_stop=config.stopping.tau_stop,
            max_epochs=config.protocol.rampup_epochs,
            delta_acc_floor=config.stopping.delta_acc_floor,
            drift_floor=config.stopping.drift_floor,
        )
        ramp_train = config.train
        if config.protocol.rampup_learning_rate is not None:
            ramp_train = TrainParams(
                learning_rate=config.protocol.rampup_learning_rate,
                batch_size=config.train.batch_size,
            )
        inits = {
            "from-base": trace.base_final.weights,
            "from-previous": trace.deployed_final,
        }
        epochs_to_target: dict[str, int] = {}
        for arm_name, init in inits.items():
            _, session = retrain_with_early_stop(
                init,
                items,
                ramp_stopping,
                lambda epoch: 0.0,
                train=ramp_train,
                rng=rng_for(seed, "rampup-fit"),
                early_stop=False,
            )
            assert session.initial_accuracy is not None
            curve_rows.append((seed, arm_name, 0, session.initial_accuracy))
            for rec in session.records:
                curve_rows.append((seed, arm_name, rec.epoch, rec.accuracy))
            epochs_to_target[arm_name] = _epochs_to_fraction_of_plateau(
                session.initial_accuracy, [r.accuracy for r in session.records]
            )
        per_seed.append(
            {
                "seed": seed,
                "epochs_from_base": epochs_to_target["from-base"],
                "epochs_from_previous": epochs_to_target["from-previous"],
            }
        )
    _write_csv(root / "rampup.csv", RAMPUP_COLUMNS, curve_rows)
    _write_csv(root / "runs.csv", RUNS_COLUMNS, runs_rows)
    med_base = float(np.median([d["epochs_from_base"] for d in per_seed]))
    med_prev = float(np.median([d["epochs_from_previous"] for d in per_seed]))
    return {
        "per_seed": per_seed,
        "median_epochs_from_base": med_base,
        "median_epochs_from_previous": med_prev,
    }


def run_base_convergence(config: ExperimentConfig, root: Path) -> dict:
    """Figs-4/8/19-analog protocol.

    Per seed: (walk) run the policy over the first family walk and
    record base-to-specialized probe distances per round; then run a
    second, unseen walk from the same family twice — (fresh) with a
    new random base and (reused) warm-started from the first walk's
    final base — and compare convergence rounds.
    """
    probes = probe_features(config.model)
    arm = config.arms[0]
    n = config.stream.num_scenes
    conv_rows: list[tuple] = []
    dist_rows: list[tuple] = []
    runs_rows: list[tuple] = []
    per_seed: list[dict] = []
    for seed in config.seeds:
        walk_trace, walk_report, _ = _run_one(config, arm, seed, probes)
        write_run_outputs(root / "walk" / f"seed-{seed}", walk_trace, walk_report, probes)
        runs_rows.append(_runs_row(arm, walk_report, walk_trace))
        for info in walk_trace.rounds:
            if info.base_updated and info.phi_before is not None and info.zeta is not None:
                dist_rows.append(
                    (
                        seed, info.round_index, info.period_scene_id,
                        probe_distance(info.phi_before, info.zeta, probes),
                    )
                )
        if walk_trace.base_final is None:
            raise AssertionError("base-convergence protocol needs a base-keeping policy")

        second = continue_walk(
            config.stream, config.model, seed, count=n, start_index=n + 1
        )
        fresh_trace, fresh_report, _ = _run_one(
            config, arm, seed, probes, script=second
        )
        write_run_outputs(root / "fresh" / f"seed-{seed}", fresh_trace, fresh_report, probes)
        runs_rows.append(_runs_row(arm, fresh_report, fresh_trace))

        reused_trace, reused_report, _ = _run_one(
            config, arm, seed, probes,
            script=second,
            initial_base=walk_trace.base_final.clone(),
            initial_weights=walk_trace.base_final.weights.copy(),
        )
        write_run_outputs(
            root / "reused" / f"seed-{seed}", reused_trace, reused_report, probes
        )
        runs_rows.append(_runs_row(arm, reused_report, reused_trace))

        rows = (
            ("walk", walk_trace, walk_report),
            ("fresh", fresh_trace, fresh_report),
            ("reused", reused_trace, reused_report),
        )
        for name, tr, rep in rows:
            conv_rows.append(
                (
                    seed, name, rep.convergence_round, len(tr.rounds),
                    sum(1 for s in tr.sessions if not s.skipped),
                )
            )
        per_seed.append(
            {
                "seed": seed,
                "fresh_convergence": fresh_report.convergence_round,
                "reused_convergence": reused_report.convergence_round,
            }
        )
    _write_csv(root / "convergence.csv", CONVERGENCE_COLUMNS, conv_rows)
    _write_csv(root / "distances.csv", DISTANCES_COLUMNS, dist_rows)
    _write_csv(root / "runs.csv", RUNS_COLUMNS, runs_rows)

    def _conv_value(v, total: int) -> float:
        return float(v) if v is not None else float(total + 1)

    fresh_vals = [
        _conv_value(d["fresh_convergence"], n * 2) for d in per_seed
    ]
    reused_vals = [
        _conv_value(d["reused_convergence"], n * 2) for d in per_seed
    ]
    return {
        "per_seed": per_seed,
        "median_fresh_convergence": float(np.median(fresh_vals)),
        "median_reused_convergence": float(np.median(reused_vals)),
    }


def run_experiment(config: ExperimentConfig, out_root: str | Path | None = None) -> ExperimentResult:
    """Execute every (arm, seed) run and write all artifact files.

    Returns the experiment root and the root summary; raises
    ConfigError for bad configs and lets runtime failures propagate.
    """
    base = Path(out_root) if out_root is not None else Path(config.out_dir)
    root = base / config.name
    root.mkdir(parents=True, exist_ok=True)
    _write_json(root / "config.json", _config_echo(config))

    if config.protocol.kind == "rampup":
        summary = run_rampup(config, root)
    elif config.protocol.kind == "base-convergence":
        summary = run_base_convergence(config, root)
    else:
        summary = run_standard(config, root)

    payload = {
        "schema_version": SCHEMA_VERSION,
        "name": config.name,
        "protocol": config.protocol.kind,
        "arms": [arm.name for arm in config.arms],
        "seeds": list(config.seeds),
        "result": summary,
    }
    _write_json(root / "experiment.json", payload)
    return ExperimentResult(root=root, summary=payload)
