"""Shared test utilities: CSV readers and timeline arithmetic."""

from __future__ import annotations

import csv
import math
from pathlib import Path


def read_csv(path: Path | str) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def fnum(row: dict[str, str], key: str) -> float:
    return float(row[key])


def fbool(row: dict[str, str], key: str) -> bool:
    value = row[key]
    assert value in ("true", "false"), f"non-boolean cell {value!r}"
    return value == "true"


def median(values) -> float:
    data = sorted(values)
    if not data:
        raise ValueError("median of empty sequence")
    n = len(data)
    mid = n // 2
    if n % 2:
        return float(data[mid])
    return 0.5 * (data[mid - 1] + data[mid])


def training_overlap(timeline_rows, lo: float, hi: float) -> float:
    """Total training-tagged time inside [lo, hi] from timeline.csv rows."""
    total = 0.0
    for row in timeline_rows:
        if row["tag"] != "training":
            continue
        start, end = float(row["start"]), float(row["end"])
        total += max(0.0, min(end, hi) - max(start, lo))
    return total


def session_spans(session_rows, lo: float, hi: float) -> list[tuple[float, float]]:
    """Deduplicated (start, end) spans of non-skipped sessions triggered in (lo, hi].

    sessions.csv carries one row per epoch, so a session's span repeats
    across its rows; the set() collapses that to one span per session.
    """
    spans = set()
    for row in session_rows:
        if fbool(row, "skipped"):
            continue
        trigger = float(row["trigger_time"])
        if lo < trigger <= hi:
            spans.add((float(row["start_time"]), float(row["end_time"])))
    return sorted(spans)


def assert_partition(timeline_rows, horizon: float, tol: float = 1e-9) -> None:
    """Timeline rows must tile [0, horizon] contiguously with known tags."""
    assert timeline_rows, "empty timeline"
    now = 0.0
    for row in timeline_rows:
        start, end = float(row["start"]), float(row["end"])
        assert math.isclose(start, now, abs_tol=tol), f"gap/overlap at {start} vs {now}"
        assert end >= start - tol, f"interval runs backwards: {start}..{end}"
        assert row["tag"] in ("training", "inference", "idle"), row["tag"]
        now = end
    assert math.isclose(now, horizon, abs_tol=tol), f"timeline ends at {now}, not {horizon}"
