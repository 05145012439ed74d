"""Canned experiment configurations.

Each preset is a fully-populated ExperimentConfig with documented
defaults and a fresh seed list; `--seeds N` swaps in seeds 1..N.
The five presets map to the mechanism-level questions the simulator
exists to answer:

- rampup: how many epochs specialization needs when initialized from
  the accumulated base versus from the previous specialized model.
- drift-robustness: accuracy and retraining time across the stitched
  S1, S2, S1, S3, S3 scene sequence for the three base-update rules.
- sampler-ablation: diversity-plus-entropy selection at label budget B
  against uniform sampling at 1x, 2x, 4x and 8x the budget.
- base-convergence: base-to-specialized probe distances over a long
  same-family walk, plus reused-versus-fresh base convergence.
- compute-squeeze: the same workload on devices at capacity factors
  1, 1/2, 1/4 and 1/8 for the gated policy and the always-full
  retrainer.

Every preset fixes its own stream geometry, model size, and training
knobs; the values below are calibrated so each preset's headline
comparison is decided by the mechanism it isolates rather than by
saturation (all arms at ceiling) or starvation (all arms at chance).
Two recurring choices deserve a note:

- Stopping weights: the scheduler's running-max normalization makes
  the first epoch of every warm session score w1 - w2.  Presets that
  rely on early stopping therefore use w2 < w1, so a session is never
  halted purely by its opening drift reading; w2 = 0.25 keeps the
  drift brake active without letting it dominate, and the rampup
  preset sets w2 = 0 because its walk should halt on gain decay
  alone.
- Class geometry: low input dimension with many classes puts class
  regions in genuine competition, which is what makes specialization,
  forgetting and recovery visible at desk scale; wide, easy
  geometries let every policy ride one shared model and decide
  nothing.
"""

from __future__ import annotations

from ..meta import EwmaPolicy
from ..model import ModelConfig
from ..policies import PolicyId
from ..sampler import SamplerConfig
from ..scheduler import CostModel, StoppingParams, TrainParams
from .config import ArmSpec, ConfigError, ExperimentConfig, ProtocolSpec, StreamSpec

PRESET_NAMES = (
    "rampup",
    "drift-robustness",
    "sampler-ablation",
    "base-convergence",
    "compute-squeeze",
)

_DESK_COST = CostModel(
    inference_cost=1.0, train_cost_per_item=1.0, epoch_overhead=2.0, capacity=120.0
)


def _seeds(n: int) -> tuple[int, ...]:
    return tuple(range(1, n + 1))


def _rampup() -> ExperimentConfig:
    # The walk specializes hard (high learning rate, gain-decay-only
    # stopping, small selected sets) so each specialized model carries
    # real scene-specific overfit, while the base averages it away with
    # a slow constant step.  The ramp fits then run at a much lower
    # learning rate so epochs-to-plateau resolves the init difference.
    return ExperimentConfig(
        name="rampup",
        model=ModelConfig(input_dim=8, hidden_dim=8, num_classes=6),
        stream=StreamSpec(
            kind="family-walk",
            rate=10.0,
            separation=2.5,
            noise=1.9,
            jitter=0.6,
            segment_duration=30.0,
            num_scenes=20,
            scene_seed=101,
        ),
        arms=(ArmSpec(name="dynamic", policy=PolicyId.DYNAMIC_EWMA),),
        seeds=_seeds(10),
        cost=_DESK_COST,
        sampler=SamplerConfig(top_fraction=0.12),
        stopping=StoppingParams(w1=1.0, w2=0.0, tau_stop=0.1, max_epochs=25),
        ewma=EwmaPolicy(tau_sim=0.9, eps_high=0.08, eps_low=0.08),
        train=TrainParams(learning_rate=0.8, batch_size=8),
        protocol=ProtocolSpec(
            kind="rampup",
            rampup_items=160,
            rampup_epochs=40,
            rampup_learning_rate=0.015,
        ),
        retrain_period=15.0,
    )


def _drift_robustness() -> ExperimentConfig:
    # Crowded geometry: eight classes in six dimensions with noise on
    # the order of half the class spacing, and far-off drift targets.
    # Specializing on one scene then measurably costs accuracy on the
    # others, so the three base-update rules genuinely diverge on the
    # return-to-S1 and repeated-S3 segments.  Equal label budgets keep
    # per-epoch training cost identical across arms, so retraining-time
    # differences isolate epoch counts.
    return ExperimentConfig(
        name="drift-robustness",
        model=ModelConfig(input_dim=6, hidden_dim=4, num_classes=8),
        stream=StreamSpec(
            kind="stitched",
            rate=25.0,
            separation=1.0,
            noise=1.2,
            jitter=0.25,
            drift_magnitude=5.0,
            segment_duration=30.0,
            pattern=("S1", "S2", "S1", "S3", "S3"),
            scene_seed=211,
        ),
        arms=(
            ArmSpec(name="dynamic", policy=PolicyId.DYNAMIC_EWMA, label_budget=64),
            ArmSpec(name="static", policy=PolicyId.STATIC_EWMA, label_budget=64),
            ArmSpec(name="full", policy=PolicyId.FULL_UPDATE, label_budget=64),
        ),
        seeds=_seeds(20),
        cost=_DESK_COST,
        sampler=SamplerConfig(top_fraction=0.4),
        stopping=StoppingParams(w1=1.0, w2=0.25, tau_stop=0.1, max_epochs=25),
        ewma=EwmaPolicy(tau_sim=0.9, eps_high=0.45, eps_low=0.05),
        train=TrainParams(learning_rate=0.25, batch_size=8),
        retrain_period=15.0,
    )


def _sampler_ablation() -> ExperimentConfig:
    # Fixed epoch budgets keep the retrain controller out of the
    # comparison; only the selection rule and the label budget differ.
    # The strict diversity percentile makes the accepted pool hug the
    # budget, so the selected set is a spread covering sample of the
    # buffer rather than an entropy-extreme sliver.
    budget = 12
    return ExperimentConfig(
        name="sampler-ablation",
        model=ModelConfig(input_dim=16, hidden_dim=12, num_classes=4),
        stream=StreamSpec(
            kind="family-walk",
            rate=10.0,
            separation=4.0,
            noise=1.5,
            jitter=1.2,
            segment_duration=30.0,
            num_scenes=10,
            scene_seed=307,
        ),
        arms=(
            ArmSpec(
                name="scps-1x",
                policy=PolicyId.DYNAMIC_EWMA,
                sampler="diversity",
                label_budget=budget,
                epoch_budget=10,
            ),
            ArmSpec(
                name="uniform-1x",
                policy=PolicyId.DYNAMIC_EWMA,
                sampler="uniform",
                label_budget=budget,
                epoch_budget=10,
            ),
            ArmSpec(
                name="uniform-2x",
                policy=PolicyId.DYNAMIC_EWMA,
                sampler="uniform",
                label_budget=2 * budget,
                epoch_budget=10,
            ),
            ArmSpec(
                name="uniform-4x",
                policy=PolicyId.DYNAMIC_EWMA,
                sampler="uniform",
                label_budget=4 * budget,
                epoch_budget=10,
            ),
            ArmSpec(
                name="uniform-8x",
                policy=PolicyId.DYNAMIC_EWMA,
                sampler="uniform",
                label_budget=8 * budget,
                epoch_budget=10,
            ),
        ),
        seeds=_seeds(10),
        cost=_DESK_COST,
        sampler=SamplerConfig(percentile=0.85, top_fraction=0.5),
        stopping=StoppingParams(w1=1.0, w2=0.25, tau_stop=0.1, max_epochs=25),
        ewma=EwmaPolicy(tau_sim=0.9, eps_high=0.3, eps_low=0.05),
        train=TrainParams(learning_rate=0.15, batch_size=8),
        retrain_period=15.0,
    )


def _base_convergence() -> ExperimentConfig:
    return ExperimentConfig(
        name="base-convergence",
        model=ModelConfig(input_dim=16, hidden_dim=12, num_classes=4),
        stream=StreamSpec(
            kind="family-walk",
            rate=10.0,
            separation=4.0,
            noise=0.9,
            jitter=1.4,
            segment_duration=30.0,
            num_scenes=20,
            scene_seed=409,
        ),
        arms=(ArmSpec(name="dynamic", policy=PolicyId.DYNAMIC_EWMA),),
        seeds=_seeds(10),
        cost=_DESK_COST,
        sampler=SamplerConfig(top_fraction=0.15),
        stopping=StoppingParams(w1=1.0, w2=0.25, tau_stop=0.1, max_epochs=25),
        ewma=EwmaPolicy(tau_sim=0.9, eps_high=0.3, eps_low=0.05),
        train=TrainParams(learning_rate=0.15, batch_size=8),
        protocol=ProtocolSpec(kind="base-convergence", convergence_epochs=5),
        retrain_period=15.0,
    )


def _compute_squeeze() -> ExperimentConfig:
    factors = ((1.0, "1x"), (0.5, "2x"), (0.25, "4x"), (0.125, "8x"))
    arms = []
    for factor, tag in factors:
        arms.append(
            ArmSpec(
                name=f"dynamic-div{tag}",
                policy=PolicyId.DYNAMIC_EWMA,
                capacity_factor=factor,
            )
        )
        arms.append(
            ArmSpec(
                name=f"continual-div{tag}",
                policy=PolicyId.CONTINUAL,
                capacity_factor=factor,
            )
        )
    return ExperimentConfig(
        name="compute-squeeze",
        model=ModelConfig(input_dim=16, hidden_dim=12, num_classes=4),
        stream=StreamSpec(
            kind="family-walk",
            rate=10.0,
            separation=4.0,
            noise=0.7,
            jitter=1.2,
            segment_duration=30.0,
            num_scenes=10,
            scene_seed=503,
        ),
        arms=tuple(arms),
        seeds=_seeds(20),
        cost=_DESK_COST,
        sampler=SamplerConfig(top_fraction=0.15),
        stopping=StoppingParams(w1=1.0, w2=0.25, tau_stop=0.1, max_epochs=25),
        ewma=EwmaPolicy(tau_sim=0.9, eps_high=0.3, eps_low=0.05),
        train=TrainParams(learning_rate=0.15, batch_size=8),
        retrain_period=30.0,
    )


_BUILDERS = {
    "rampup": _rampup,
    "drift-robustness": _drift_robustness,
    "sampler-ablation": _sampler_ablation,
    "base-convergence": _base_convergence,
    "compute-squeeze": _compute_squeeze,
}


def preset(name: str) -> ExperimentConfig:
    """Named preset config; unknown names list the valid ones."""
    if name not in _BUILDERS:
        raise ConfigError(
            f"unknown preset {name!r}; valid presets: {', '.join(PRESET_NAMES)}"
        )
    return _BUILDERS[name]()
