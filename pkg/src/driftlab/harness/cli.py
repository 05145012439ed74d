"""The driftlab command line.

Subcommands:
  run <config.toml>            execute an experiment from a config file
  preset <name>                execute a canned experiment
  validate <config.toml>       check a config and report problems
  schema                       print file formats and config keys as JSON

Exit codes: 0 success, 1 configuration error, 2 runtime error.  The
only environment overrides honored are DRIFTLAB_OUT (output root) and
DRIFTLAB_SEEDS (comma-separated integers replacing the seed list).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .config import ConfigError, ExperimentConfig, load_config
from .presets import PRESET_NAMES, preset
from .runner import (
    CENTROIDS_COLUMNS,
    CONVERGENCE_COLUMNS,
    DISTANCES_COLUMNS,
    ITEMS_COLUMNS,
    RAMPUP_COLUMNS,
    RUN_FILES,
    RUNS_COLUMNS,
    SAMPLER_COLUMNS,
    SCHEMA_VERSION,
    SEGMENTS_COLUMNS,
    SESSIONS_COLUMNS,
    TIMELINE_COLUMNS,
    run_experiment,
)


def _apply_env(config: ExperimentConfig) -> ExperimentConfig:
    out = os.environ.get("DRIFTLAB_OUT")
    if out:
        config = replace(config, out_dir=out)
    seeds_raw = os.environ.get("DRIFTLAB_SEEDS")
    if seeds_raw:
        try:
            seeds = tuple(int(s) for s in seeds_raw.split(",") if s.strip())
        except ValueError:
            raise ConfigError(
                f"DRIFTLAB_SEEDS must be comma-separated integers, got {seeds_raw!r}"
            ) from None
        if not seeds:
            raise ConfigError("DRIFTLAB_SEEDS is set but empty")
        config = replace(config, seeds=seeds)
    return config


def _schema_payload() -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "exit_codes": {"0": "success", "1": "config error", "2": "runtime error"},
        "env": {
            "DRIFTLAB_OUT": "output root directory override",
            "DRIFTLAB_SEEDS": "comma-separated seed list override",
        },
        "presets": list(PRESET_NAMES),
        "config_toml": {
            "top_level": [
                "name", "seeds", "retrain_period", "horizon", "out_dir",
            ],
            "tables": [
                "model", "stream", "cost", "sampler", "stopping",
                "ewma", "train", "protocol",
            ],
            "arrays": ["arms"],
            "arm_keys": [
                "name", "policy", "sampler", "label_budget",
                "epoch_budget", "capacity_factor",
            ],
        },
        "run_files": list(RUN_FILES),
        "csv_columns": {
            "items.csv": list(ITEMS_COLUMNS),
            "timeline.csv": list(TIMELINE_COLUMNS),
            "sessions.csv": list(SESSIONS_COLUMNS),
            "sampler.csv": list(SAMPLER_COLUMNS),
            "centroids.csv": list(CENTROIDS_COLUMNS),
            "runs.csv": list(RUNS_COLUMNS),
            "segments.csv": list(SEGMENTS_COLUMNS),
            "rampup.csv": list(RAMPUP_COLUMNS),
            "convergence.csv": list(CONVERGENCE_COLUMNS),
            "distances.csv": list(DISTANCES_COLUMNS),
        },
    }


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftlab",
        description="Deterministic continual-learning simulation on a serialized accelerator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a TOML config")
    p_run.add_argument("config", help="path to the experiment TOML file")
    p_run.add_argument("--out", default=None, help="output root directory")

    p_preset = sub.add_parser("preset", help="run a canned experiment")
    p_preset.add_argument("name", help=f"one of: {', '.join(PRESET_NAMES)}")
    p_preset.add_argument(
        "--seeds", type=int, default=None, help="replace the seed list with 1..N"
    )
    p_preset.add_argument("--out", default=None, help="output root directory")

    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("config", help="path to the experiment TOML file")

    sub.add_parser("schema", help="print output schemas and config keys as JSON")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = _apply_env(load_config(args.config))
            result = run_experiment(config, args.out)
            print(f"experiment {config.name}: wrote {result.root}")
        elif args.command == "preset":
            config = preset(args.name)
            if args.seeds is not None:
                if args.seeds < 1:
                    raise ConfigError("--seeds must be >= 1")
                config = replace(config, seeds=tuple(range(1, args.seeds + 1)))
            config = _apply_env(config)
            result = run_experiment(config, args.out)
            print(f"preset {config.name}: wrote {result.root}")
        elif args.command == "validate":
            config = _apply_env(load_config(args.config))
            print(
                f"OK: {config.name} ({len(config.arms)} arms, "
                f"{len(config.seeds)} seeds, protocol {config.protocol.kind})"
            )
        elif args.command == "schema":
            print(json.dumps(_schema_payload(), indent=1, sort_keys=True))
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
