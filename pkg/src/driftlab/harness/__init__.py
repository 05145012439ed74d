"""Experiment harness: config files, presets, metrics, CSV/JSON emission."""

from .config import ArmSpec, ConfigError, ExperimentConfig, StreamSpec, load_config
from .metrics import MetricsReport, compute_metrics
from .presets import PRESET_NAMES, preset
from .runner import run_experiment

__all__ = [
    "ArmSpec",
    "ConfigError",
    "ExperimentConfig",
    "StreamSpec",
    "load_config",
    "MetricsReport",
    "compute_metrics",
    "PRESET_NAMES",
    "preset",
    "run_experiment",
]
