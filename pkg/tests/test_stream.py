"""Synthetic drifting stream generator."""

import numpy as np
import pytest
from scipy import stats

from driftlab.stream import (
    DataItem,
    SceneSpec,
    StreamScript,
    make_scene,
    perturb_scene,
    sample_stream,
    stitched_script,
    write_stream_csv,
)


def _nearest_centroid_accuracy(items, scene: SceneSpec) -> float:
    x = np.stack([it.features for it in items])
    y = np.array([it.label for it in items])
    dist = np.linalg.norm(x[:, None, :] - scene.centroids[None, :, :], axis=2)
    return float((dist.argmin(axis=1) == y).mean())


class TestMakeScene:
    def test_deterministic_bit_for_bit(self):
        a = make_scene(12, 4, 6, 2.0, 0.5, 31)
        b = make_scene(12, 4, 6, 2.0, 0.5, 31)
        assert np.array_equal(a.centroids, b.centroids)
        assert np.array_equal(a.priors, b.priors)
        c = make_scene(13, 4, 6, 2.0, 0.5, 31)
        assert not np.array_equal(a.centroids, c.centroids)

    def test_two_class_separation_honored(self):
        scene = make_scene(5, 2, 2, 4.0, 0.1, 31)
        gap = np.linalg.norm(scene.centroids[0] - scene.centroids[1])
        assert gap >= 4.0 - 1e-9

    def test_all_pairs_meet_separation(self):
        scene = make_scene(6, 5, 4, 1.5, 0.3, 31)
        for i in range(5):
            for j in range(i + 1, 5):
                gap = np.linalg.norm(scene.centroids[i] - scene.centroids[j])
                assert gap >= 1.5 - 1e-9

    def test_priors_are_probabilities(self):
        scene = make_scene(7, 6, 3, 1.0, 0.2, 31)
        assert np.all(scene.priors > 0.0)
        assert scene.priors.sum() == pytest.approx(1.0, abs=1e-12)

    def test_same_family_shares_backbone(self):
        a = make_scene(1, 3, 4, 2.0, 0.5, 31, jitter=0.0)
        b = make_scene(999, 3, 4, 2.0, 0.5, 31, jitter=0.0)
        c = make_scene(1, 3, 4, 2.0, 0.5, 32, jitter=0.0)
        assert np.array_equal(a.centroids, b.centroids)
        assert not np.array_equal(a.centroids, c.centroids)

    def test_scene_id_defaults_to_seed(self):
        assert make_scene(42, 2, 2, 1.0, 0.1, 31).scene_id == 42
        assert make_scene(42, 2, 2, 1.0, 0.1, 31, scene_id=7).scene_id == 7

    def test_validation(self):
        with pytest.raises(ValueError):
            make_scene(1, 1, 2, 1.0, 0.1, 31)
        with pytest.raises(ValueError):
            make_scene(1, 2, 0, 1.0, 0.1, 31)
        with pytest.raises(ValueError):
            make_scene(1, 2, 2, 0.0, 0.1, 31)
        with pytest.raises(ValueError):
            make_scene(1, 2, 2, 1.0, -0.1, 31)


class TestPerturbScene:
    def test_zero_magnitude_unchanged(self):
        scene = make_scene(3, 4, 5, 2.0, 0.4, 31)
        out = perturb_scene(scene, 0.0, 99, scene_id=77)
        assert np.array_equal(out.centroids, scene.centroids)
        assert np.array_equal(out.priors, scene.priors)
        assert out.scene_id == 77
        assert out.family_id == scene.family_id

    def test_each_centroid_displaced_by_exact_norm(self):
        scene = make_scene(3, 4, 5, 2.0, 0.4, 31)
        for seed in range(10):
            for magnitude in (1.0, 2.5):
                out = perturb_scene(scene, magnitude, seed)
                shifts = np.linalg.norm(out.centroids - scene.centroids, axis=1)
                assert np.allclose(shifts, magnitude, atol=1e-9)

    def test_priors_redrawn_but_still_simplex(self):
        scene = make_scene(3, 4, 5, 2.0, 0.4, 31)
        out = perturb_scene(scene, 1.0, 5)
        assert not np.array_equal(out.priors, scene.priors)
        assert out.priors.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(out.priors >= 0.0)

    def test_deterministic_and_validated(self):
        scene = make_scene(3, 4, 5, 2.0, 0.4, 31)
        a = perturb_scene(scene, 1.5, 8)
        b = perturb_scene(scene, 1.5, 8)
        assert np.array_equal(a.centroids, b.centroids)
        with pytest.raises(ValueError):
            perturb_scene(scene, -1.0, 8)


class TestSampleStream:
    def test_item_count_and_grid(self):
        scene = make_scene(1, 3, 4, 2.0, 0.5, 31)
        script = StreamScript(segments=((scene, 10.0),), rate=5.0)
        items = sample_stream(script, 7)
        assert len(items) == 50
        times = np.array([it.arrival_time for it in items])
        assert np.allclose(times, np.arange(50) / 5.0, atol=1e-12)

    def test_boundary_assignment(self):
        s1 = make_scene(1, 3, 4, 2.0, 0.5, 31, scene_id=1)
        s2 = make_scene(2, 3, 4, 2.0, 0.5, 31, scene_id=2)
        script = StreamScript(segments=((s1, 10.0), (s2, 10.0)), rate=10.0)
        by_time = {round(it.arrival_time, 6): it for it in sample_stream(script, 7)}
        assert by_time[9.9].scene_id == 1
        assert by_time[10.1].scene_id == 2
        assert by_time[10.0].scene_id == 2  # boundary belongs to the new scene

    def test_determinism(self):
        scene = make_scene(1, 3, 4, 2.0, 0.5, 31)
        script = StreamScript(segments=((scene, 20.0),), rate=10.0)
        a = sample_stream(script, 3)
        b = sample_stream(script, 3)
        assert all(np.array_equal(x.features, y.features) for x, y in zip(a, b))
        assert [x.label for x in a] == [y.label for y in b]

    def test_appending_a_segment_keeps_earlier_items_bit_identical(self):
        s1 = make_scene(1, 3, 4, 2.0, 0.5, 31, scene_id=1)
        s2 = make_scene(2, 3, 4, 2.0, 0.5, 31, scene_id=2)
        short = StreamScript(segments=((s1, 15.0),), rate=8.0)
        long = StreamScript(segments=((s1, 15.0), (s2, 15.0)), rate=8.0)
        a = sample_stream(short, 11)
        b = sample_stream(long, 11)[: len(a)]
        assert len(a) == 120
        assert all(np.array_equal(x.features, y.features) for x, y in zip(a, b))
        assert [x.label for x in a] == [y.label for y in b]

    def test_class_frequencies_within_three_standard_errors(self):
        scene = make_scene(9, 4, 6, 2.0, 0.5, 31)
        script = StreamScript(segments=((scene, 200.0),), rate=10.0)
        items = sample_stream(script, 5)
        n = len(items)
        assert n == 2000
        counts = np.bincount([it.label for it in items], minlength=4)
        for k in range(4):
            p = scene.priors[k]
            se = np.sqrt(p * (1.0 - p) / n)
            assert abs(counts[k] / n - p) <= 3.0 * se

    def test_within_scene_stationarity_chi_square(self):
        scene = make_scene(10, 4, 6, 2.0, 0.5, 31)
        script = StreamScript(segments=((scene, 240.0),), rate=10.0)
        items = sample_stream(script, 6)
        assert len(items) >= 2000
        half = len(items) // 2
        first = np.bincount([it.label for it in items[:half]], minlength=4)
        second = np.bincount([it.label for it in items[half:]], minlength=4)
        _, p_value, _, _ = stats.chi2_contingency(np.stack([first, second]))
        assert p_value >= 0.001

    def test_low_noise_regime_is_nearest_centroid_separable(self):
        scene = make_scene(11, 4, 6, 4.0, 0.01, 31)
        script = StreamScript(segments=((scene, 400.0),), rate=10.0)
        items = sample_stream(script, 8)
        assert _nearest_centroid_accuracy(items, scene) >= 0.999

    def test_high_noise_regime_is_hard(self):
        scene = make_scene(11, 6, 4, 1.5, 1.5, 31, jitter=0.2)
        script = StreamScript(segments=((scene, 400.0),), rate=10.0)
        items = sample_stream(script, 8)
        assert _nearest_centroid_accuracy(items, scene) <= 0.9


class TestScripts:
    def test_stitched_reuses_scene_objects(self):
        s1 = make_scene(1, 3, 4, 2.0, 0.5, 31, scene_id=1)
        s2 = make_scene(2, 3, 4, 2.0, 0.5, 31, scene_id=2)
        script = stitched_script(
            [("S1", 10.0), ("S2", 10.0), ("S1", 10.0)], {"S1": s1, "S2": s2}, 10.0
        )
        assert script.segments[0][0] is script.segments[2][0]
        assert script.segments[1][0] is s2

    def test_stitched_unknown_tag_rejected(self):
        s1 = make_scene(1, 3, 4, 2.0, 0.5, 31)
        with pytest.raises(KeyError, match="S9"):
            stitched_script([("S9", 10.0)], {"S1": s1}, 10.0)

    def test_single_segment_equals_scene_alone(self):
        s1 = make_scene(1, 3, 4, 2.0, 0.5, 31, scene_id=1)
        via_stitch = stitched_script([("S1", 25.0)], {"S1": s1}, 4.0)
        direct = StreamScript(segments=((s1, 25.0),), rate=4.0)
        a = sample_stream(via_stitch, 2)
        b = sample_stream(direct, 2)
        assert all(np.array_equal(x.features, y.features) for x, y in zip(a, b))

    def test_script_validation(self):
        s1 = make_scene(1, 3, 4, 2.0, 0.5, 31)
        tall = make_scene(2, 3, 5, 2.0, 0.5, 31)
        with pytest.raises(ValueError):
            StreamScript(segments=(), rate=1.0)
        with pytest.raises(ValueError):
            StreamScript(segments=((s1, 0.0),), rate=1.0)
        with pytest.raises(ValueError):
            StreamScript(segments=((s1, 10.0),), rate=0.0)
        with pytest.raises(ValueError):
            StreamScript(segments=((s1, 10.0), (tall, 10.0)), rate=1.0)

    def test_segment_index_bounds(self):
        s1 = make_scene(1, 3, 4, 2.0, 0.5, 31)
        script = StreamScript(segments=((s1, 10.0),), rate=1.0)
        assert script.segment_index_at(0.0) == 0
        with pytest.raises(ValueError):
            script.segment_index_at(10.0)
        with pytest.raises(ValueError):
            script.segment_index_at(-0.1)


def test_write_stream_csv(tmp_path):
    scene = make_scene(1, 3, 4, 2.0, 0.5, 31)
    script = StreamScript(segments=((scene, 5.0),), rate=4.0)
    items = sample_stream(script, 1)
    path = tmp_path / "stream.csv"
    write_stream_csv(items, str(path))
    lines = path.read_text().strip().splitlines()
    assert len(lines) == len(items) + 1
    assert lines[0] == "time,scene_id,label,f0,f1,f2,f3"


def test_data_item_features_frozen():
    item = DataItem(features=np.ones(3), label=0, arrival_time=0.0, scene_id=1)
    with pytest.raises(ValueError):
        item.features[0] = 2.0
