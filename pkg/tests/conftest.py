"""Shared fixtures: one session-scoped run per canned experiment.

The acceptance tests and several module tests read the same experiment
outputs, so each preset runs exactly once per pytest session and every
consumer gets (output root, wall seconds).  Acceptance tests register a
PASS/FAIL line here; the terminal summary prints one line per criterion.
"""

from __future__ import annotations

import time
from pathlib import Path

import pytest

from driftlab.harness.presets import preset
from driftlab.harness.runner import run_experiment

_ACCEPTANCE_LINES: dict[int, tuple[bool, str]] = {}
_ACCEPTANCE_TOUCHED = False


def _record(criterion: int, passed: bool, detail: str) -> None:
    global _ACCEPTANCE_TOUCHED
    _ACCEPTANCE_TOUCHED = True
    _ACCEPTANCE_LINES[criterion] = (passed, detail)


@pytest.fixture(scope="session")
def acceptance():
    """Callable(criterion, passed, detail) recording one summary line."""
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_TOUCHED:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in range(1, 11):
        if criterion in _ACCEPTANCE_LINES:
            passed, detail = _ACCEPTANCE_LINES[criterion]
            verdict = "PASS" if passed else "FAIL"
        else:
            verdict, detail = "FAIL", "test errored before measurement"
        terminalreporter.write_line(f"ACCEPTANCE {criterion:02d} {verdict} {detail}")


def _run_preset(name: str, tmp_path_factory) -> tuple[Path, float]:
    out = tmp_path_factory.mktemp(f"preset-{name}")
    started = time.monotonic()
    result = run_experiment(preset(name), out)
    return result.root, time.monotonic() - started


@pytest.fixture(scope="session")
def rampup_run(tmp_path_factory):
    return _run_preset("rampup", tmp_path_factory)


@pytest.fixture(scope="session")
def drift_robustness_run(tmp_path_factory):
    return _run_preset("drift-robustness", tmp_path_factory)


@pytest.fixture(scope="session")
def sampler_ablation_run(tmp_path_factory):
    return _run_preset("sampler-ablation", tmp_path_factory)


@pytest.fixture(scope="session")
def base_convergence_run(tmp_path_factory):
    return _run_preset("base-convergence", tmp_path_factory)


@pytest.fixture(scope="session")
def compute_squeeze_run(tmp_path_factory):
    return _run_preset("compute-squeeze", tmp_path_factory)
