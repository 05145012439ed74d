"""Discrete-event simulation of a serialized accelerator.

One compute device time-shares inference and retraining: items are
served in arrival order while the lane is free, and every
retrain_period simulated seconds the lane pauses to select candidates,
label them, and retrain.  Retraining runs epoch by epoch; after each
epoch a stopping score trades the epoch's holdout-accuracy gain
against drift measured from items that arrived during the pause, and
the session halts once the score drops to the threshold.  On
completion the new weights are deployed and the base model (when the
policy keeps one) absorbs them via the gated interpolation.

Everything is deterministic given (script, policy, cost model, seed),
and the emitted timeline is an exact partition of [0, horizon].
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .meta import BaseModelState, EwmaPolicy, bootstrap_base, update_base
from .model import ModelConfig, ModelWeights, accuracy, forward, init_weights, sgd_epoch
from .ops import centroid, cosine_similarity
from .policies import PolicyId, PolicySpec, ewma_for, policy_spec
from .sampler import (
    DiversityBuffer,
    LabelLedger,
    SamplerConfig,
    UniformBuffer,
    label,
    prioritize,
)
from .seeding import rng_for
from .stream import DataItem, StreamScript, sample_stream

TAG_INFERENCE = "inference"
TAG_TRAINING = "training"
TAG_IDLE = "idle"

HOLDOUT_FRACTION = 0.2


@dataclass(frozen=True)
class CostModel:
    """Compute prices in abstract units and the device's unit rate."""

    inference_cost: float = 1.0
    train_cost_per_item: float = 1.0
    epoch_overhead: float = 2.0
    capacity: float = 120.0

    def __post_init__(self) -> None:
        for name in ("inference_cost", "train_cost_per_item", "epoch_overhead"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0")
        if not self.capacity > 0.0:
            raise ValueError("capacity must be > 0")

    def scaled(self, factor: float) -> "CostModel":
        """Same prices on a device with capacity scaled by `factor`."""
        if not factor > 0.0:
            raise ValueError("capacity factor must be > 0")
        return CostModel(
            self.inference_cost,
            self.train_cost_per_item,
            self.epoch_overhead,
            self.capacity * factor,
        )


@dataclass(frozen=True)
class StoppingParams:
    """Stopping-score weights, threshold, cap, and normalizer floors."""

    w1: float = 1.0
    w2: float = 1.0
    tau_stop: float = 0.1
    max_epochs: int = 25
    delta_acc_floor: float = 1e-3
    drift_floor: float = 1e-3

    def __post_init__(self) -> None:
        if self.w1 < 0.0 or self.w2 < 0.0:
            raise ValueError("w1 and w2 must be >= 0")
        if not math.isfinite(self.tau_stop):
            raise ValueError("tau_stop must be finite")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not (self.delta_acc_floor > 0.0 and self.drift_floor > 0.0):
            raise ValueError("normalizer floors must be > 0")


@dataclass(frozen=True)
class TrainParams:
    """SGD hyperparameters for retraining sessions."""

    learning_rate: float = 0.15
    batch_size: int = 8

    def __post_init__(self) -> None:
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0.0):
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def stopping_score(
    delta_acc: float,
    delta_acc_max: float,
    drift: float,
    drift_max: float,
    params: StoppingParams,
) -> float:
    """w1 * (dA / dA_max) - w2 * (D / D_max); normalizers pre-floored."""
    if not delta_acc_max > 0.0:
        raise ValueError("delta_acc_max must be floored > 0 before scoring")
    if not drift_max > 0.0:
        raise ValueError("drift_max must be floored > 0 before scoring")
    return params.w1 * (delta_acc / delta_acc_max) - params.w2 * (drift / drift_max)


@dataclass(eq=False)
class DriftMonitor:
    """Incremental drift against a frozen reference centroid.

    The reference is set when a retrain starts (from the period's
    inference embeddings); items arriving during the pause fold into an
    incoming centroid, and the drift is one minus the cosine similarity
    between the two.  With nothing incoming yet the drift is 0.
    """

    reference: np.ndarray
    d_max: float = 0.0
    last: float = 0.0
    _sum: np.ndarray | None = None
    count: int = 0

    def __post_init__(self) -> None:
        ref = np.ascontiguousarray(self.reference, dtype=np.float64)
        if ref.ndim != 1 or not np.isfinite(ref).all():
            raise ValueError("reference centroid must be a finite 1-d vector")
        if float(np.linalg.norm(ref)) == 0.0:
            raise ValueError("reference centroid must have nonzero norm")
        self.reference = ref
        self._sum = np.zeros_like(ref)

    def observe(self, embeddings: Sequence[np.ndarray]) -> None:
        for emb in embeddings:
            e = np.asarray(emb, dtype=np.float64)
            if e.shape != self.reference.shape:
                raise ValueError("embedding dim does not match the reference")
            self._sum += e
            self.count += 1

    def measure(self) -> float:
        if self.count == 0:
            drift = 0.0
        else:
            incoming = self._sum / self.count
            if float(np.linalg.norm(incoming)) == 0.0:
                drift = 0.0
            else:
                drift = 1.0 - cosine_similarity(self.reference, incoming)
        self.d_max = max(self.d_max, drift)
        self.last = drift
        return drift


def drift_measure(
    state: DriftMonitor, new_embeddings: Sequence[np.ndarray]
) -> tuple[float, DriftMonitor]:
    """Fold new embeddings and return (D_t, updated state)."""
    state.observe(new_embeddings)
    return state.measure(), state


@dataclass(frozen=True)
class EpochRecord:
    """One epoch of a retraining session."""

    epoch: int
    accuracy: float
    delta_acc: float
    delta_acc_max: float
    drift: float
    drift_max: float
    score: float
    halted: bool


@dataclass(eq=False)
class RetrainSession:
    """Log of one retraining attempt (possibly skipped or truncated)."""

    round_index: int
    trigger_time: float
    start_time: float
    end_time: float
    selected_size: int
    n_train: int
    n_holdout: int
    init_source: str
    early_stop_enabled: bool
    epoch_cap: int
    records: list[EpochRecord] = field(default_factory=list)
    initial_accuracy: float | None = None
    halted_early: bool = False
    truncated: bool = False
    skipped: bool = False
    skip_reason: str | None = None
    train_units: float = 0.0
    selection_units: float = 0.0

    @property
    def epochs_run(self) -> int:
        return len(self.records)


class _SessionEngine:
    """Epoch-stepping core shared by the standalone op and the event loop."""

    def __init__(
        self,
        init: ModelWeights,
        x: np.ndarray,
        y: np.ndarray,
        stopping: StoppingParams,
        train: TrainParams,
        rng: np.random.Generator,
        early_stop: bool,
        epoch_cap: int,
    ):
        n = x.shape[0]
        if n < 2:
            raise ValueError("a session needs >= 2 labeled items")
        if epoch_cap < 1:
            raise ValueError("epoch_cap must be >= 1")
        n_hold = max(1, int(HOLDOUT_FRACTION * n))
        perm = rng.permutation(n)
        hold, tr = perm[:n_hold], perm[n_hold:]
        self.x_train = np.ascontiguousarray(x[tr])
        self.y_train = np.ascontiguousarray(y[tr])
        self.x_hold = np.ascontiguousarray(x[hold])
        self.y_hold = np.ascontiguousarray(y[hold])
        self.stopping = stopping
        self.train = train
        self.rng = rng
        self.early_stop = early_stop
        self.epoch_cap = epoch_cap
        self.weights = init.copy()
        self.initial_accuracy = accuracy(init, self.x_hold, self.y_hold)
        self._acc_prev = self.initial_accuracy
        self._dacc_max = stopping.delta_acc_floor
        self._d_max = stopping.drift_floor
        self.records: list[EpochRecord] = []
        self.halted_early = False
        self.done = False

    @property
    def n_train(self) -> int:
        return self.x_train.shape[0]

    @property
    def n_holdout(self) -> int:
        return self.x_hold.shape[0]

    def step(self, drift: float) -> EpochRecord:
        """Run one epoch against the given drift reading."""
        if self.done:
            raise RuntimeError("session already finished")
        if not (math.isfinite(drift) and drift >= 0.0):
            raise ValueError("drift must be finite and >= 0")
        self.weights, acc = sgd_epoch(
            self.weights,
            self.x_train,
            self.y_train,
            self.train.learning_rate,
            self.x_hold,
            self.y_hold,
            batch_size=self.train.batch_size,
            rng=self.rng,
        )
        assert acc is not None
        delta = acc - self._acc_prev
        self._acc_prev = acc
        self._dacc_max = max(self._dacc_max, delta)
        self._d_max = max(self._d_max, drift)
        score = stopping_score(delta, self._dacc_max, drift, self._d_max, self.stopping)
        epoch = len(self.records) + 1
        halted = self.early_stop and score <= self.stopping.tau_stop
        record = EpochRecord(
            epoch, acc, delta, self._dacc_max, drift, self._d_max, score, halted
        )
        self.records.append(record)
        if halted:
            self.halted_early = True
            self.done = True
        elif epoch >= self.epoch_cap:
            self.done = True
        return record


def _skipped_session(round_index: int, trigger: float, at: float, selected: int, reason: str) -> RetrainSession:
    return RetrainSession(
        round_index=round_index,
        trigger_time=trigger,
        start_time=at,
        end_time=at,
        selected_size=selected,
        n_train=0,
        n_holdout=0,
        init_source="none",
        early_stop_enabled=False,
        epoch_cap=0,
        skipped=True,
        skip_reason=reason,
    )


def retrain_with_early_stop(
    base: ModelWeights,
    labeled_items: Sequence[DataItem],
    params: StoppingParams,
    drift_feed: Callable[[int], float],
    *,
    train: TrainParams | None = None,
    rng: np.random.Generator | None = None,
    early_stop: bool = True,
    epoch_cap: int | None = None,
) -> tuple[ModelWeights, RetrainSession]:
    """Standalone retraining session outside the event loop.

    Initializes from `base`, runs sgd epochs pulling D_t from
    `drift_feed(epoch)` until the stopping score crosses the threshold
    or the cap is reached.  With fewer than 2 items the session is
    skipped and `base` is returned untouched.
    """
    train = train or TrainParams()
    rng = rng if rng is not None else np.random.default_rng(0)
    cap = params.max_epochs if epoch_cap is None else epoch_cap
    if len(labeled_items) < 2:
        session = _skipped_session(0, 0.0, 0.0, len(labeled_items), "insufficient_items")
        return base, session
    x = np.stack([it.features for it in labeled_items])
    y = np.asarray([it.label for it in labeled_items], dtype=np.int64)
    engine = _SessionEngine(base, x, y, params, train, rng, early_stop, cap)
    while not engine.done:
        engine.step(float(drift_feed(len(engine.records) + 1)))
    session = RetrainSession(
        round_index=0,
        trigger_time=0.0,
        start_time=0.0,
        end_time=0.0,
        selected_size=len(labeled_items),
        n_train=engine.n_train,
        n_holdout=engine.n_holdout,
        init_source="base",
        early_stop_enabled=early_stop,
        epoch_cap=cap,
        records=list(engine.records),
        initial_accuracy=engine.initial_accuracy,
        halted_early=engine.halted_early,
    )
    return engine.weights, session


@dataclass(eq=False)
class Interval:
    """One timeline segment; [start, end) tagged with the lane activity."""

    start: float
    end: float
    tag: str
    note: str = ""

    @property
    def duration(self) -> float:
        return self.end - self.start


class TimelineBuilder:
    """Appends contiguous intervals; adjacent same-tag/note rows merge."""

    def __init__(self) -> None:
        self.now = 0.0
        self.intervals: list[Interval] = []

    def advance(self, tag: str, end: float, note: str = "") -> None:
        if end < self.now:
            raise RuntimeError(f"timeline moved backwards: {end} < {self.now}")
        if end == self.now and tag != TAG_TRAINING:
            return
        last = self.intervals[-1] if self.intervals else None
        if last is not None and last.tag == tag and last.note == note:
            last.end = end
        else:
            self.intervals.append(Interval(self.now, end, tag, note))
        self.now = end

    def finish(self, horizon: float) -> None:
        if self.now < horizon:
            self.advance(TAG_IDLE, horizon)


@dataclass(eq=False)
class ItemRecord:
    """Serving outcome for one generated item."""

    index: int
    arrival_time: float
    scene_id: int
    true_label: int
    served_time: float | None = None
    predicted: int | None = None
    correct: bool | None = None
    lane: str | None = None
    model: str | None = None


@dataclass(eq=False)
class RoundInfo:
    """Everything the CPU lane decided at one retrain boundary."""

    round_index: int
    trigger_time: float
    period_scene_id: int | None
    offered: int
    accepted: int
    selected: int
    threshold_first: float | None
    threshold_last: float | None
    period_centroid: np.ndarray | None
    similarity: float | None = None
    epsilon: float | None = None
    base_updated: bool = False
    deployed: bool = False
    phi_before: ModelWeights | None = None
    phi_after: ModelWeights | None = None
    zeta: ModelWeights | None = None


@dataclass(eq=False)
class RunConfig:
    """Bundle of every knob run_pipeline needs besides script and policy."""

    model: ModelConfig
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    stopping: StoppingParams = field(default_factory=StoppingParams)
    ewma: EwmaPolicy = field(default_factory=EwmaPolicy)
    train: TrainParams = field(default_factory=TrainParams)
    retrain_period: float = 30.0
    label_budget: int | None = None
    sampler_kind: str = "diversity"
    horizon: float | None = None
    initial_base: BaseModelState | None = None
    initial_weights: ModelWeights | None = None
    oracle_samples: int = 256
    oracle_epochs: int = 30

    def __post_init__(self) -> None:
        if not (math.isfinite(self.retrain_period) and self.retrain_period > 0.0):
            raise ValueError("retrain_period must be finite and > 0")
        if self.label_budget is not None and self.label_budget < 1:
            raise ValueError("label_budget must be >= 1 when set")
        if self.sampler_kind not in ("diversity", "uniform"):
            raise ValueError("sampler_kind must be 'diversity' or 'uniform'")
        if self.horizon is not None and not self.horizon > 0.0:
            raise ValueError("horizon must be > 0")
        if self.oracle_samples < 4:
            raise ValueError("oracle_samples must be >= 4")
        if self.oracle_epochs < 1:
            raise ValueError("oracle_epochs must be >= 1")


@dataclass(eq=False)
class RunTrace:
    """Full record of one simulated run."""

    policy_id: PolicyId
    seed: int
    horizon: float
    rate: float
    overloaded: bool
    items: list[ItemRecord]
    timeline: list[Interval]
    sessions: list[RetrainSession]
    rounds: list[RoundInfo]
    ledger: LabelLedger
    base_final: BaseModelState | None
    deployed_final: ModelWeights
    initial_weights: ModelWeights

    @property
    def generated(self) -> int:
        return len(self.items)

    @property
    def served(self) -> int:
        return sum(1 for rec in self.items if rec.served_time is not None)

    @property
    def queued_at_horizon(self) -> int:
        return self.generated - self.served


def _train_oracle_models(
    script: StreamScript,
    config: RunConfig,
    w_init: ModelWeights,
    seed: int,
) -> dict[int, ModelWeights]:
    """Offline per-scene models on ample seeded samples; zero simulated cost."""
    models: dict[int, ModelWeights] = {}
    for scene, _ in script.segments:
        if scene.scene_id in models:
            continue
        rng = rng_for(seed, "oracle", scene.scene_id)
        cum = np.cumsum(scene.priors)
        cum[-1] = 1.0
        labels = np.searchsorted(cum, rng.random(config.oracle_samples), side="right")
        labels = labels.astype(np.int64)
        x = scene.centroids[labels] + scene.noise * rng.standard_normal(
            (config.oracle_samples, scene.dim)
        )
        w = w_init.copy()
        for _ in range(config.oracle_epochs):
            w, _ = sgd_epoch(
                w, x, labels, config.train.learning_rate, None, None,
                batch_size=config.train.batch_size, rng=rng,
            )
        models[scene.scene_id] = w
    return models


def run_pipeline(
    script: StreamScript,
    policy: PolicyId | PolicySpec | str,
    cost: CostModel,
    seed: int,
    config: RunConfig,
) -> RunTrace:
    """Simulate the full horizon for one (script, policy, seed).

    See the module docstring for the event-loop semantics.  Returns the
    complete RunTrace; the timeline is asserted to partition
    [0, horizon] exactly and serving is asserted to conserve items.
    """
    spec = policy if isinstance(policy, PolicySpec) else policy_spec(policy)
    horizon = script.total_duration if config.horizon is None else config.horizon
    if horizon > script.total_duration + 1e-9:
        raise ValueError("horizon exceeds the script duration")

    all_items = sample_stream(script, seed)
    items = [it for it in all_items if it.arrival_time < horizon]
    n = len(items)
    records = [
        ItemRecord(
            index=i,
            arrival_time=it.arrival_time,
            scene_id=it.scene_id,
            true_label=it.label,
        )
        for i, it in enumerate(items)
    ]

    if config.initial_weights is not None:
        if config.initial_weights.config != config.model:
            raise ValueError("initial_weights do not match the model config")
        w_init = config.initial_weights.copy()
    else:
        w_init = init_weights(config.model, rng_for(seed, "init"))

    deployed = w_init.copy()
    model_tag = "init"
    base: BaseModelState | None = None
    ewma = ewma_for(spec, config.ewma)
    if spec.uses_base:
        if config.initial_base is not None:
            if config.initial_base.weights.config != config.model:
                raise ValueError("initial_base does not match the model config")
            base = config.initial_base.clone()
        else:
            base = BaseModelState(weights=w_init.copy())

    oracle_models: dict[int, ModelWeights] = {}
    if spec.oracle_mode:
        oracle_models = _train_oracle_models(script, config, w_init, seed)

    if config.sampler_kind == "diversity":
        buffer: DiversityBuffer | UniformBuffer = DiversityBuffer(config.sampler)
    else:
        buffer = UniformBuffer()
    ledger = LabelLedger()
    tl = TimelineBuilder()
    pending: deque[int] = deque()
    period_embs: list[np.ndarray] = []
    period_scene: int | None = None
    rounds: list[RoundInfo] = []
    sessions: list[RetrainSession] = []
    overloaded = cost.inference_cost * script.rate > cost.capacity

    unit_inference = cost.inference_cost / cost.capacity
    arrival_cursor = 0

    def serve_record(idx: int, weights: ModelWeights, tag: str, when: float, lane: str) -> np.ndarray:
        item = items[idx]
        emb, pred = forward(weights, item.features)
        rec = records[idx]
        rec.served_time = when
        rec.predicted = pred.label
        rec.correct = pred.label == item.label
        rec.lane = lane
        rec.model = tag
        buffer.offer(item, emb)
        period_embs.append(emb)
        nonlocal period_scene
        period_scene = item.scene_id
        return emb

    def gpu_serve_until(end: float) -> None:
        nonlocal arrival_cursor
        while True:
            while arrival_cursor < n and items[arrival_cursor].arrival_time <= tl.now:
                pending.append(arrival_cursor)
                arrival_cursor += 1
            if pending:
                idx = pending[0]
                finish = tl.now + unit_inference
                if finish > end:
                    break
                pending.popleft()
                weights = (
                    oracle_models[items[idx].scene_id] if spec.oracle_mode else deployed
                )
                tag = f"oracle-{items[idx].scene_id}" if spec.oracle_mode else model_tag
                tl.advance(TAG_INFERENCE, finish)
                serve_record(idx, weights, tag, finish, "gpu")
                continue
            if arrival_cursor < n and items[arrival_cursor].arrival_time < end:
                tl.advance(TAG_IDLE, items[arrival_cursor].arrival_time)
                continue
            break
        if tl.now < end:
            tl.advance(TAG_IDLE, end)

    def pause_span(span_end: float) -> list[np.ndarray]:
        """Handle arrivals while the accelerator is paused in [now, span_end)."""
        nonlocal arrival_cursor
        embs: list[np.ndarray] = []
        while arrival_cursor < n and items[arrival_cursor].arrival_time < span_end:
            idx = arrival_cursor
            arrival_cursor += 1
            if spec.serving == "stale":
                emb = serve_record(
                    idx, deployed, model_tag, items[idx].arrival_time, "cpu"
                )
                embs.append(emb)
            else:
                pending.append(idx)
        return embs

    def run_round(trigger: float, k: int) -> None:
        nonlocal deployed, model_tag, period_embs
        info = RoundInfo(
            round_index=k,
            trigger_time=trigger,
            period_scene_id=period_scene,
            offered=buffer.offered,
            accepted=buffer.accepted,
            selected=0,
            threshold_first=None,
            threshold_last=None,
            period_centroid=centroid(period_embs) if period_embs else None,
        )
        if isinstance(buffer, DiversityBuffer) and buffer.offer_log:
            info.threshold_first = buffer.offer_log[0].threshold
            info.threshold_last = buffer.offer_log[-1].threshold
        snap_items, _ = buffer.snapshot()

        zero_budget = spec.stopping == "budget" and spec.fixed_epoch_budget == 0
        selection_units = 0.0
        selected: list[DataItem] = []
        if not zero_budget and snap_items:
            if isinstance(buffer, DiversityBuffer):
                ranking = base.weights if base is not None else deployed
                selected = prioritize(snap_items, ranking, config.sampler.top_fraction)
                if config.label_budget is not None:
                    selected = selected[: config.label_budget]
                selection_units = len(snap_items) * cost.inference_cost
            else:
                want = (
                    config.label_budget
                    if config.label_budget is not None
                    else math.ceil(config.sampler.top_fraction * len(snap_items))
                )
                selected = buffer.select(rng_for(seed, "uniform-select", k), want)
        buffer.clear()
        buffer.reset_counters()
        period_embs = []
        info.selected = len(selected)
        rounds.append(info)

        if zero_budget:
            sessions.append(_skipped_session(k, trigger, tl.now, 0, "zero_budget"))
            return

        sel_embs: list[np.ndarray] = []
        if selection_units > 0.0:
            sel_end = tl.now + selection_units / cost.capacity
            if sel_end > horizon:
                sel_embs = pause_span(horizon)
                tl.advance(TAG_INFERENCE, horizon, f"selection {k}")
                sessions.append(
                    _skipped_session(k, trigger, tl.now, len(selected), "horizon")
                )
                return
            sel_embs = pause_span(sel_end)
            tl.advance(TAG_INFERENCE, sel_end, f"selection {k}")

        if len(selected) < 2:
            sessions.append(
                _skipped_session(k, trigger, tl.now, len(selected), "insufficient_items")
            )
            return
        labeled_items, _ = label(selected, ledger)

        if spec.init_source == "base" and base is not None:
            init = base.weights
            init_source = "base"
        else:
            init = deployed
            init_source = "previous"
        cold = base is not None and base.update_count == 0
        if spec.stopping == "score":
            early = not cold
            cap = config.stopping.max_epochs
        else:
            early = False
            cap = spec.fixed_epoch_budget or config.stopping.max_epochs

        x = np.stack([it.features for it in labeled_items])
        y = np.asarray([it.label for it in labeled_items], dtype=np.int64)
        engine = _SessionEngine(
            init, x, y, config.stopping, config.train,
            rng_for(seed, "session", k), early, cap,
        )
        monitor: DriftMonitor | None = None
        if (
            info.period_centroid is not None
            and float(np.linalg.norm(info.period_centroid)) > 0.0
        ):
            monitor = DriftMonitor(info.period_centroid)
            if sel_embs:
                monitor.observe(sel_embs)

        start = tl.now
        epoch_units = cost.epoch_overhead + cost.train_cost_per_item * engine.n_train
        train_units = 0.0
        truncated = False
        while not engine.done:
            duration = epoch_units / cost.capacity
            epoch_end = tl.now + duration
            if epoch_end > horizon:
                embs = pause_span(horizon)
                if monitor is not None and embs:
                    monitor.observe(embs)
                tl.advance(TAG_TRAINING, horizon, f"round {k}")
                truncated = True
                break
            embs = pause_span(epoch_end)
            if monitor is not None:
                monitor.observe(embs)
                drift = monitor.measure()
            else:
                drift = 0.0
            engine.step(drift)
            train_units += epoch_units
            tl.advance(TAG_TRAINING, epoch_end, f"round {k}")

        sessions.append(
            RetrainSession(
                round_index=k,
                trigger_time=trigger,
                start_time=start,
                end_time=tl.now,
                selected_size=len(labeled_items),
                n_train=engine.n_train,
                n_holdout=engine.n_holdout,
                init_source=init_source,
                early_stop_enabled=early,
                epoch_cap=cap,
                records=list(engine.records),
                initial_accuracy=engine.initial_accuracy,
                halted_early=engine.halted_early,
                truncated=truncated,
                train_units=train_units,
                selection_units=selection_units,
            )
        )
        if truncated:
            return

        deployed = engine.weights
        model_tag = f"round-{k}"
        info.deployed = True
        info.zeta = engine.weights.copy()
        if base is not None and ewma is not None:
            assert info.period_centroid is not None
            sid = info.period_scene_id if info.period_scene_id is not None else -1
            if base.update_count == 0:
                info.phi_before = None
                bootstrap_base(base, engine.weights, info.period_centroid, scene_id=sid)
            else:
                info.phi_before = base.weights.copy()
                update_base(
                    base,
                    engine.weights,
                    info.period_centroid,
                    ewma,
                    scene_id=sid,
                )
            last = base.history[-1]
            info.similarity = last.similarity
            info.epsilon = last.epsilon
            info.base_updated = True
            info.phi_after = base.weights.copy()

    if spec.oracle_mode:
        triggers: list[float] = []
    else:
        triggers = []
        k = 1
        while k * config.retrain_period < horizon:
            triggers.append(k * config.retrain_period)
            k += 1

    trigger_idx = 0
    round_counter = 0
    while tl.now < horizon:
        next_trigger = triggers[trigger_idx] if trigger_idx < len(triggers) else None
        if next_trigger is None:
            gpu_serve_until(horizon)
            break
        gpu_serve_until(next_trigger)
        trigger_idx += 1
        round_counter += 1
        run_round(next_trigger, round_counter)
        while (
            trigger_idx < len(triggers)
            and triggers[trigger_idx] <= tl.now
            and tl.now < horizon
        ):
            due = tl.now
            while trigger_idx < len(triggers) and triggers[trigger_idx] <= tl.now:
                trigger_idx += 1
            round_counter += 1
            run_round(due, round_counter)
    tl.finish(horizon)

    trace = RunTrace(
        policy_id=spec.policy_id,
        seed=seed,
        horizon=horizon,
        rate=script.rate,
        overloaded=overloaded,
        items=records,
        timeline=tl.intervals,
        sessions=sessions,
        rounds=rounds,
        ledger=ledger,
        base_final=base,
        deployed_final=deployed,
        initial_weights=w_init,
    )
    _assert_trace_invariants(trace)
    return trace


def _assert_trace_invariants(trace: RunTrace) -> None:
    """Structural guarantees every run must satisfy, checked at build time."""
    tl = trace.timeline
    if tl:
        if tl[0].start != 0.0 or tl[-1].end != trace.horizon:
            raise AssertionError("timeline does not span [0, horizon]")
        for prev, cur in zip(tl, tl[1:]):
            if prev.end != cur.start:
                raise AssertionError("timeline intervals are not contiguous")
        for iv in tl:
            if iv.end < iv.start:
                raise AssertionError("negative-length interval")
    served = trace.served
    queued = trace.queued_at_horizon
    if served + queued != trace.generated:
        raise AssertionError("item accounting does not balance")
