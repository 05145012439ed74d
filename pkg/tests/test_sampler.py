"""Diversity buffer, adaptive threshold, prioritization, labeling."""

import math

import numpy as np
import pytest

from driftlab.model import ModelConfig, ModelWeights, forward
from driftlab.sampler import (
    DiversityBuffer,
    LabelLedger,
    SamplerConfig,
    UniformBuffer,
    adaptive_threshold,
    label,
    prioritize,
)
from driftlab.seeding import rng_for
from driftlab.stream import DataItem


def _item(i: int, features=None, t: float | None = None) -> DataItem:
    feats = np.array([float(i), 1.0]) if features is None else np.asarray(features, float)
    return DataItem(
        features=feats, label=0, arrival_time=float(i) if t is None else t, scene_id=1
    )


def brute_force_replay(
    offers: list[np.ndarray], config: SamplerConfig
) -> tuple[list[bool], list[int]]:
    """From-scratch reimplementation of the offer protocol.

    Keeps plain lists, recomputes every min-distance and percentile
    threshold from first principles at each step.  Returns the accept
    decisions and the indices of the offers still buffered at the end.
    """
    kept_embs: list[np.ndarray] = []
    kept_ids: list[int] = []
    window: list[float] = []
    decisions: list[bool] = []
    for idx, emb in enumerate(offers):
        tail = window[-config.window_size:]
        if len(tail) < config.min_window:
            threshold = config.bootstrap_threshold
        else:
            threshold = float(np.percentile(np.asarray(tail), config.percentile * 100.0))
        if not kept_embs:
            accepted = True
        else:
            enorm = float(np.linalg.norm(emb))
            dists = [
                1.0 - float(np.dot(kept, emb)) / (float(np.linalg.norm(kept)) * enorm)
                for kept in kept_embs
            ]
            min_dist = float(np.asarray(dists).min())
            window.append(min_dist)
            accepted = min_dist >= threshold
        if accepted:
            if len(kept_embs) == config.capacity:
                kept_embs.pop(0)
                kept_ids.pop(0)
            kept_embs.append(emb)
            kept_ids.append(idx)
        decisions.append(accepted)
    return decisions, kept_ids


class TestAdaptiveThreshold:
    def test_constant_window_returns_the_constant(self):
        for p in (0.1, 0.5, 0.9):
            assert adaptive_threshold(np.full(7, 0.42), p) == pytest.approx(0.42)

    def test_two_point_median(self):
        assert adaptive_threshold(np.array([0.0, 1.0]), 0.5) == pytest.approx(0.5)

    def test_linear_interpolation_case(self):
        got = adaptive_threshold(np.array([0.1, 0.2, 0.3, 0.4]), 0.25)
        assert got == pytest.approx(0.175, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            adaptive_threshold(np.array([]), 0.5)
        with pytest.raises(ValueError):
            adaptive_threshold(np.array([0.1]), 0.0)
        with pytest.raises(ValueError):
            adaptive_threshold(np.array([0.1]), 1.0)


class TestDiversityBuffer:
    def test_first_offer_always_accepted(self):
        buf = DiversityBuffer(SamplerConfig())
        assert buf.offer(_item(0), np.array([1.0, 0.0])) is True
        assert len(buf) == 1

    def test_identical_embedding_rejected(self):
        buf = DiversityBuffer(SamplerConfig())
        emb = np.array([0.6, 0.8])
        buf.offer(_item(0), emb)
        assert buf.offer(_item(1), emb.copy()) is False
        assert len(buf) == 1

    def test_zero_norm_dim_and_nan_rejected(self):
        buf = DiversityBuffer(SamplerConfig())
        buf.offer(_item(0), np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            buf.offer(_item(1), np.zeros(2))
        with pytest.raises(ValueError):
            buf.offer(_item(2), np.ones(3))
        with pytest.raises(ValueError):
            buf.offer(_item(3), np.array([np.nan, 1.0]))
        with pytest.raises(ValueError):
            buf.offer(_item(4), np.ones((2, 2)))

    def test_eviction_is_oldest_first(self):
        buf = DiversityBuffer(SamplerConfig(capacity=2, bootstrap_threshold=0.0))
        buf.offer(_item(0), np.array([1.0, 0.0]))
        buf.offer(_item(1), np.array([0.0, 1.0]))
        buf.offer(_item(2), np.array([-1.0, 0.0]))
        assert [it.arrival_time for it in buf.items] == [1.0, 2.0]

    def test_matches_brute_force_replay_bit_exactly(self):
        config = SamplerConfig(capacity=16, percentile=0.3, window_size=32, min_window=8)
        rng = rng_for(33, "offers")
        offers = [rng.standard_normal(6) for _ in range(120)]
        buf = DiversityBuffer(config)
        got = [buf.offer(_item(i), emb) for i, emb in enumerate(offers)]
        want, kept_ids = brute_force_replay(offers, config)
        assert got == want
        assert [int(it.arrival_time) for it in buf.items] == kept_ids

    def test_diversity_guarantee_against_recorded_thresholds(self):
        config = SamplerConfig(capacity=32, percentile=0.4, window_size=64)
        rng = rng_for(44, "offers")
        buf = DiversityBuffer(config)
        for i in range(200):
            buf.offer(_item(i), rng.standard_normal(5))
        _, embs = buf.snapshot()
        for later in range(1, len(embs)):
            threshold = buf.accept_thresholds[later]
            for earlier in range(later):
                e, l = embs[earlier], embs[later]
                cos = float(np.dot(e, l)) / (np.linalg.norm(e) * np.linalg.norm(l))
                assert 1.0 - cos >= threshold - 1e-12

    def test_window_survives_clear(self):
        buf = DiversityBuffer(SamplerConfig())
        rng = rng_for(55, "offers")
        for i in range(30):
            buf.offer(_item(i), rng.standard_normal(4))
        window_before = list(buf.window)
        buf.clear()
        assert len(buf) == 0
        assert list(buf.window) == window_before

    def test_offer_log_and_counters(self):
        buf = DiversityBuffer(SamplerConfig())
        rng = rng_for(66, "offers")
        for i in range(20):
            buf.offer(_item(i), rng.standard_normal(4))
        assert buf.offered == 20
        assert len(buf.offer_log) == 20
        assert buf.accepted == sum(1 for rec in buf.offer_log if rec.accepted)
        assert buf.offer_log[0].min_distance is None
        buf.reset_counters()
        assert buf.offered == 0 and buf.accepted == 0 and buf.offer_log == []


class TestUniformBuffer:
    def test_accepts_everything(self):
        buf = UniformBuffer()
        for i in range(10):
            assert buf.offer(_item(i), np.ones(2)) is True
        assert len(buf) == 10 and buf.accepted == 10

    def test_select_is_seeded_subset_in_arrival_order(self):
        buf = UniformBuffer()
        for i in range(10):
            buf.offer(_item(i), np.ones(2))
        picked = buf.select(rng_for(1, "pick"), 4)
        assert len(picked) == 4
        times = [it.arrival_time for it in picked]
        assert times == sorted(times)
        again = buf.select(rng_for(1, "pick"), 4)
        assert [it.arrival_time for it in again] == times
        assert len(buf.select(rng_for(1, "pick"), 99)) == 10


class TestPrioritize:
    CFG = ModelConfig(2, 4, 3)

    def _base(self) -> ModelWeights:
        from driftlab.model import init_weights

        return init_weights(self.CFG, rng_for(5, "base"))

    def _entropies(self, items, base):
        return {
            float(it.arrival_time): forward(base, it.features)[1].entropy for it in items
        }

    def test_full_fraction_returns_everything_sorted_by_entropy(self):
        base = self._base()
        rng = rng_for(6, "x")
        items = [_item(i, features=rng.standard_normal(2)) for i in range(12)]
        picked = prioritize(items, base, 1.0)
        assert len(picked) == 12
        ent = self._entropies(items, base)
        values = [ent[float(it.arrival_time)] for it in picked]
        assert values == sorted(values, reverse=True)

    def test_ceil_rule_gives_two_of_three_at_034(self):
        base = self._base()
        rng = rng_for(7, "x")
        items = [_item(i, features=rng.standard_normal(2)) for i in range(3)]
        picked = prioritize(items, base, 0.34)
        assert len(picked) == math.ceil(0.34 * 3) == 2
        ent = self._entropies(items, base)
        ranked = sorted(items, key=lambda it: -ent[float(it.arrival_time)])
        assert [it.arrival_time for it in picked] == [
            it.arrival_time for it in ranked[:2]
        ]

    def test_top_third_returns_exactly_the_most_uncertain_item(self):
        base = self._base()
        rng = rng_for(8, "x")
        items = [_item(i, features=rng.standard_normal(2)) for i in range(3)]
        picked = prioritize(items, base, 0.3)
        assert len(picked) == 1
        ent = self._entropies(items, base)
        assert ent[float(picked[0].arrival_time)] == max(ent.values())

    def test_bit_identical_entropy_ties_break_to_earlier_arrival(self):
        base = self._base()
        feats = np.array([0.37, -0.8])
        late = _item(5, features=feats.copy(), t=5.0)
        early = _item(2, features=feats.copy(), t=2.0)
        other = _item(9, features=np.array([9.0, 9.0]), t=9.0)
        picked = prioritize([late, early, other], base, 1.0)
        tied = [it.arrival_time for it in picked if np.array_equal(it.features, feats)]
        assert tied == [2.0, 5.0]

    def test_monotone_prefix_property(self):
        base = self._base()
        rng = rng_for(9, "x")
        items = [_item(i, features=rng.standard_normal(2)) for i in range(17)]
        previous: list[float] = []
        for fraction in (0.1, 0.25, 0.5, 0.75, 1.0):
            picked = [it.arrival_time for it in prioritize(items, base, fraction)]
            assert picked[: len(previous)] == previous
            previous = picked

    def test_validation(self):
        base = self._base()
        with pytest.raises(ValueError):
            prioritize([], base, 0.5)
        with pytest.raises(ValueError):
            prioritize([_item(0)], base, 0.0)
        with pytest.raises(ValueError):
            prioritize([_item(0)], base, 1.5)


class TestLabelAndLedger:
    def test_empty_set_leaves_total_unchanged(self):
        ledger = LabelLedger()
        out, ledger = label([], ledger)
        assert out == [] and ledger.total == 0
        assert ledger.per_round == [0]

    def test_twenty_items_charge_twenty_with_ground_truth(self):
        ledger = LabelLedger()
        items = [_item(i) for i in range(20)]
        out, ledger = label(items, ledger)
        assert ledger.total == 20
        assert [it.label for it in out] == [it.label for it in items]

    def test_cumulative_total_is_sum_of_rounds(self):
        ledger = LabelLedger()
        sizes = [3, 0, 7, 5]
        for size in sizes:
            _, ledger = label([_item(i) for i in range(size)], ledger)
        assert ledger.total == sum(sizes)
        assert ledger.per_round == sizes

    def test_negative_charge_rejected(self):
        with pytest.raises(ValueError):
            LabelLedger().charge(-1)


def test_sampler_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(capacity=0)
    with pytest.raises(ValueError):
        SamplerConfig(percentile=0.0)
    with pytest.raises(ValueError):
        SamplerConfig(percentile=1.0)
    with pytest.raises(ValueError):
        SamplerConfig(top_fraction=0.0)
    with pytest.raises(ValueError):
        SamplerConfig(top_fraction=1.2)
    with pytest.raises(ValueError):
        SamplerConfig(window_size=0)
    with pytest.raises(ValueError):
        SamplerConfig(min_window=0)
    with pytest.raises(ValueError):
        SamplerConfig(bootstrap_threshold=-0.1)
