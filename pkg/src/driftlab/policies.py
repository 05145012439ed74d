"""Retraining policies.

Every policy is a parameterization of the one scheduler: policies
differ only in where retraining initializes from, how the base-update
step size is chosen, how sessions stop, and how arrivals are handled
while the accelerator is busy training.  That surface is captured by
PolicySpec so tests can assert no policy smuggles in extra behavior.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .meta import EwmaPolicy


class PolicyId(str, Enum):
    """The implemented retraining policies."""

    DYNAMIC_EWMA = "dynamic_ewma"
    STATIC_EWMA = "static_ewma"
    FULL_UPDATE = "full_update"
    CONTINUAL = "continual"
    ORACLE = "oracle"


@dataclass(frozen=True)
class PolicySpec:
    """The four knobs a policy may set (plus the oracle escape hatch).

    init_source: weights a retrain starts from ("base" or "previous").
    epsilon: "dynamic" for the similarity gate, a float for a fixed
        step, or None when no base model is maintained.
    stopping: "score" for early stopping, "budget" for a fixed epoch
        count (fixed_epoch_budget, which may be 0 = never retrain).
    serving: how arrivals are answered while the accelerator trains —
        "stale" (immediate CPU answers from the pre-retrain model) or
        "replay" (queue and serve after training at catch-up speed).
    """

    policy_id: PolicyId
    init_source: str = "base"
    epsilon: str | float | None = "dynamic"
    stopping: str = "score"
    serving: str = "stale"
    fixed_epoch_budget: int | None = None
    oracle_mode: bool = False

    def __post_init__(self) -> None:
        if self.init_source not in ("base", "previous"):
            raise ValueError("init_source must be 'base' or 'previous'")
        if self.stopping not in ("score", "budget"):
            raise ValueError("stopping must be 'score' or 'budget'")
        if self.serving not in ("stale", "replay"):
            raise ValueError("serving must be 'stale' or 'replay'")
        if isinstance(self.epsilon, str) and self.epsilon != "dynamic":
            raise ValueError("epsilon must be 'dynamic', a float, or None")
        if isinstance(self.epsilon, float) and not 0.0 < self.epsilon <= 1.0:
            raise ValueError("fixed epsilon must be in (0, 1]")
        if self.stopping == "budget":
            if self.fixed_epoch_budget is None or self.fixed_epoch_budget < 0:
                raise ValueError("budget stopping needs fixed_epoch_budget >= 0")
        elif self.fixed_epoch_budget is not None:
            raise ValueError("fixed_epoch_budget only applies to budget stopping")
        if self.init_source == "base" and self.epsilon is None and not self.oracle_mode:
            raise ValueError("base initialization requires a base update rule")

    @property
    def uses_base(self) -> bool:
        return self.epsilon is not None and not self.oracle_mode


POLICIES: dict[PolicyId, PolicySpec] = {
    PolicyId.DYNAMIC_EWMA: PolicySpec(
        policy_id=PolicyId.DYNAMIC_EWMA,
        init_source="base",
        epsilon="dynamic",
        stopping="score",
        serving="stale",
    ),
    PolicyId.STATIC_EWMA: PolicySpec(
        policy_id=PolicyId.STATIC_EWMA,
        init_source="base",
        epsilon=0.1,
        stopping="score",
        serving="stale",
    ),
    PolicyId.FULL_UPDATE: PolicySpec(
        policy_id=PolicyId.FULL_UPDATE,
        init_source="base",
        epsilon=1.0,
        stopping="score",
        serving="stale",
    ),
    PolicyId.CONTINUAL: PolicySpec(
        policy_id=PolicyId.CONTINUAL,
        init_source="previous",
        epsilon=None,
        stopping="budget",
        serving="replay",
        fixed_epoch_budget=25,
    ),
    PolicyId.ORACLE: PolicySpec(
        policy_id=PolicyId.ORACLE,
        init_source="base",
        epsilon=None,
        stopping="score",
        serving="stale",
        oracle_mode=True,
    ),
}


def policy_spec(policy: PolicyId | str, *, fixed_epoch_budget: int | None = None) -> PolicySpec:
    """Canonical spec for a policy id, optionally overriding the budget."""
    pid = PolicyId(policy)
    spec = POLICIES[pid]
    if fixed_epoch_budget is not None:
        if spec.stopping != "budget":
            raise ValueError(f"{pid.value} does not take an epoch budget")
        spec = replace(spec, fixed_epoch_budget=fixed_epoch_budget)
    return spec


def ewma_for(spec: PolicySpec, configured: EwmaPolicy) -> EwmaPolicy | None:
    """EwmaPolicy a run should use for base updates under this policy.

    The dynamic policy uses the configured gate; fixed-epsilon policies
    collapse the gate to their constant; no-base policies return None.
    """
    if spec.epsilon is None or spec.oracle_mode:
        return None
    if spec.epsilon == "dynamic":
        return configured
    eps = float(spec.epsilon)
    return EwmaPolicy(tau_sim=configured.tau_sim, eps_high=eps, eps_low=eps)
