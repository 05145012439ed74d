"""Drift-gated base-model maintenance.

After each retrain the base weights are pulled toward the newly
specialized weights by a reptile-style interpolation
phi <- (1 - eps) * phi + eps * zeta.  The step size eps is gated by
how similar the new scene looks to the previous one (cosine similarity
of their embedding centroids): familiar scenes take the large step,
novel scenes the conservative one.  The base persists to a versioned
JSON artifact so later deployments can start from it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelConfig, ModelWeights
from .ops import cosine_similarity, interpolate

BASE_FORMAT_VERSION = 1
_SIM_SLACK = 1e-9


@dataclass(frozen=True)
class EwmaPolicy:
    """Similarity gate for the base update step size."""

    tau_sim: float = 0.9
    eps_high: float = 0.3
    eps_low: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 < self.eps_low <= self.eps_high <= 1.0:
            raise ValueError("need 0 < eps_low <= eps_high <= 1")
        if not -1.0 <= self.tau_sim <= 1.0:
            raise ValueError("tau_sim must be in [-1, 1]")


@dataclass(frozen=True, eq=False)
class BaseUpdateRecord:
    """History row: which scene, how similar, which step was taken."""

    scene_id: int
    similarity: float | None
    epsilon: float


@dataclass(eq=False)
class BaseModelState:
    """Base weights plus the context needed to gate the next update."""

    weights: ModelWeights
    prev_centroid: np.ndarray | None = None
    update_count: int = 0
    history: list[BaseUpdateRecord] = field(default_factory=list)

    def clone(self) -> "BaseModelState":
        return BaseModelState(
            weights=self.weights.copy(),
            prev_centroid=None if self.prev_centroid is None else self.prev_centroid.copy(),
            update_count=self.update_count,
            history=list(self.history),
        )


def select_epsilon(s: float, policy: EwmaPolicy) -> float:
    """eps_high when the scenes look alike (s >= tau_sim), else eps_low."""
    if not (-1.0 - _SIM_SLACK <= s <= 1.0 + _SIM_SLACK):
        raise ValueError(f"similarity {s} outside [-1, 1]")
    return policy.eps_high if s >= policy.tau_sim else policy.eps_low


def _check_centroid(current_scene_centroid: np.ndarray) -> np.ndarray:
    cur = np.ascontiguousarray(current_scene_centroid, dtype=np.float64)
    if cur.ndim != 1:
        raise ValueError("scene centroid must be a 1-d vector")
    if not np.isfinite(cur).all():
        raise ValueError("scene centroid contains non-finite values")
    return cur


def bootstrap_base(
    state: BaseModelState,
    zeta: ModelWeights,
    current_scene_centroid: np.ndarray,
    *,
    scene_id: int = -1,
) -> BaseModelState:
    """Bring the base into existence from the first specialized model.

    Until the first specialization finishes, the state only carries the
    seeded random initialization as a stand-in; the first trained model
    replaces it outright (recorded as an epsilon = 1 step) so the base
    never dilutes real structure with leftover random weights.  Later
    updates go through update_base.
    """
    if state.update_count != 0:
        raise ValueError("bootstrap_base requires a base with no updates yet")
    if zeta.config != state.weights.config:
        raise ValueError("zeta shape does not match the base weights")
    cur = _check_centroid(current_scene_centroid)
    state.weights = zeta.copy()
    state.prev_centroid = cur.copy()
    state.update_count = 1
    state.history.append(BaseUpdateRecord(scene_id, None, 1.0))
    return state


def update_base(
    state: BaseModelState,
    zeta: ModelWeights,
    current_scene_centroid: np.ndarray,
    policy: EwmaPolicy,
    *,
    scene_id: int = -1,
) -> BaseModelState:
    """One gated interpolation step; mutates and returns `state`.

    Cold start (no previous centroid) takes the conservative eps_low
    step.  The current centroid becomes the reference for the next
    update, and the (scene, similarity, epsilon) triple is appended to
    the append-only history.
    """
    if zeta.config != state.weights.config:
        raise ValueError("zeta shape does not match the base weights")
    cur = _check_centroid(current_scene_centroid)
    if state.prev_centroid is None:
        similarity: float | None = None
        eps = policy.eps_low
    else:
        similarity = cosine_similarity(state.prev_centroid, cur)
        eps = select_epsilon(similarity, policy)
    state.weights = interpolate(state.weights, zeta, eps)
    state.prev_centroid = cur.copy()
    state.update_count += 1
    state.history.append(BaseUpdateRecord(scene_id, similarity, eps))
    return state


def save_base(state: BaseModelState, path: str) -> None:
    """Persist the base to a versioned JSON artifact (lossless floats)."""
    cfg = state.weights.config
    doc = {
        "format_version": BASE_FORMAT_VERSION,
        "model": {
            "input_dim": cfg.input_dim,
            "hidden_dim": cfg.hidden_dim,
            "num_classes": cfg.num_classes,
        },
        "weights": [float(v) for v in state.weights.flatten()],
        "prev_centroid": None
        if state.prev_centroid is None
        else [float(v) for v in state.prev_centroid],
        "update_count": state.update_count,
        "history": [
            {
                "scene_id": rec.scene_id,
                "similarity": rec.similarity,
                "epsilon": rec.epsilon,
            }
            for rec in state.history
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_base(path: str, config: ModelConfig) -> BaseModelState:
    """Load a persisted base; rejects version or shape mismatches."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != BASE_FORMAT_VERSION:
        raise ValueError(f"unsupported base format: {doc.get('format_version')}")
    m = doc["model"]
    stored = (m["input_dim"], m["hidden_dim"], m["num_classes"])
    wanted = (config.input_dim, config.hidden_dim, config.num_classes)
    if stored != wanted:
        raise ValueError(f"base was saved for model {stored}, expected {wanted}")
    flat = np.asarray(doc["weights"], dtype=np.float64)
    weights = ModelWeights.from_flat(config, flat)
    prev = doc.get("prev_centroid")
    history = [
        BaseUpdateRecord(
            scene_id=int(rec["scene_id"]),
            similarity=None if rec["similarity"] is None else float(rec["similarity"]),
            epsilon=float(rec["epsilon"]),
        )
        for rec in doc.get("history", [])
    ]
    count = int(doc.get("update_count", 0))
    if count < 0 or not math.isfinite(count):
        raise ValueError("invalid update_count")
    return BaseModelState(
        weights=weights,
        prev_centroid=None if prev is None else np.asarray(prev, dtype=np.float64),
        update_count=count,
        history=history,
    )
