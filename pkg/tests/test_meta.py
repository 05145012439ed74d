"""Drift-gated base-model maintenance and persistence."""

import numpy as np
import pytest

from driftlab.meta import (
    BaseModelState,
    EwmaPolicy,
    bootstrap_base,
    load_base,
    save_base,
    select_epsilon,
    update_base,
)
from driftlab.model import ModelConfig, ModelWeights, init_weights
from driftlab.ops import interpolate
from driftlab.seeding import rng_for

CFG = ModelConfig(4, 3, 2)


def _weights(seed: int) -> ModelWeights:
    return init_weights(CFG, rng_for(seed, "w"))


def _fill(value: float) -> ModelWeights:
    return ModelWeights.from_flat(CFG, np.full(CFG.num_params, value))


class TestEwmaPolicy:
    def test_defaults_match_documented_gate(self):
        policy = EwmaPolicy()
        assert (policy.tau_sim, policy.eps_high, policy.eps_low) == (0.9, 0.3, 0.05)

    def test_zero_epsilon_rejected_but_limit_exists_via_interpolate(self):
        # The invariant 0 < eps_low wins over any eps = 0 configuration;
        # the "phi unchanged" limiting behavior lives in interpolate(., ., 0).
        with pytest.raises(ValueError):
            EwmaPolicy(tau_sim=0.9, eps_high=0.0, eps_low=0.0)
        phi, zeta = _weights(1), _weights(2)
        assert np.array_equal(interpolate(phi, zeta, 0.0).flatten(), phi.flatten())

    def test_ordering_and_range_validation(self):
        with pytest.raises(ValueError):
            EwmaPolicy(eps_high=0.1, eps_low=0.3)
        with pytest.raises(ValueError):
            EwmaPolicy(eps_high=1.2, eps_low=0.5)
        with pytest.raises(ValueError):
            EwmaPolicy(tau_sim=1.5)
        with pytest.raises(ValueError):
            EwmaPolicy(tau_sim=-1.5)
        EwmaPolicy(tau_sim=-1.0, eps_high=1.0, eps_low=1.0)


class TestSelectEpsilon:
    POLICY = EwmaPolicy(tau_sim=0.9, eps_high=0.3, eps_low=0.05)

    def test_perfect_similarity_takes_large_step(self):
        assert select_epsilon(1.0, self.POLICY) == 0.3

    def test_dissimilar_takes_small_step(self):
        assert select_epsilon(0.0, self.POLICY) == 0.05

    def test_boundary_is_inclusive(self):
        assert select_epsilon(0.9, self.POLICY) == 0.3
        assert select_epsilon(0.9 - 1e-6, self.POLICY) == 0.05

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            select_epsilon(1.1, self.POLICY)
        with pytest.raises(ValueError):
            select_epsilon(-1.1, self.POLICY)


class TestBootstrapBase:
    def test_replaces_random_init_outright(self):
        state = BaseModelState(weights=_weights(1))
        zeta = _weights(2)
        centroid = np.array([1.0, 0.0, 0.5])
        out = bootstrap_base(state, zeta, centroid, scene_id=4)
        assert np.array_equal(out.weights.flatten(), zeta.flatten())
        assert out.update_count == 1
        rec = out.history[0]
        assert (rec.scene_id, rec.similarity, rec.epsilon) == (4, None, 1.0)
        assert np.array_equal(out.prev_centroid, centroid)

    def test_requires_untouched_base(self):
        state = BaseModelState(weights=_weights(1), update_count=1)
        with pytest.raises(ValueError):
            bootstrap_base(state, _weights(2), np.ones(3))

    def test_shape_mismatch_rejected(self):
        state = BaseModelState(weights=_weights(1))
        other = init_weights(ModelConfig(4, 3, 3), rng_for(3, "w"))
        with pytest.raises(ValueError):
            bootstrap_base(state, other, np.ones(3))


class TestUpdateBase:
    POLICY = EwmaPolicy(tau_sim=0.9, eps_high=0.3, eps_low=0.05)

    def test_zeta_equal_phi_is_fixed_point(self):
        phi = _weights(5)
        state = BaseModelState(weights=phi.copy(), prev_centroid=np.ones(3), update_count=1)
        out = update_base(state, phi.copy(), np.ones(3), self.POLICY)
        assert np.array_equal(out.weights.flatten(), phi.flatten())

    def test_hand_value_with_similar_scene(self):
        state = BaseModelState(
            weights=_fill(2.0), prev_centroid=np.array([1.0, 0.0, 0.0]), update_count=1
        )
        out = update_base(state, _fill(0.0), np.array([1.0, 0.0, 0.0]), self.POLICY)
        # similarity 1 >= 0.9 -> eps 0.3 -> 2.0 + 0.3 * (0 - 2) = 1.4
        assert np.allclose(out.weights.flatten(), 1.4, atol=1e-15)
        rec = out.history[-1]
        assert rec.similarity == pytest.approx(1.0)
        assert rec.epsilon == 0.3

    def test_dissimilar_scene_takes_conservative_step(self):
        state = BaseModelState(
            weights=_fill(2.0), prev_centroid=np.array([1.0, 0.0, 0.0]), update_count=1
        )
        out = update_base(state, _fill(0.0), np.array([0.0, 1.0, 0.0]), self.POLICY)
        # similarity 0 < 0.9 -> eps 0.05 -> 2.0 + 0.05 * (0 - 2) = 1.9
        assert np.allclose(out.weights.flatten(), 1.9, atol=1e-15)
        assert out.history[-1].epsilon == 0.05

    def test_cold_start_uses_conservative_step_and_records_no_similarity(self):
        state = BaseModelState(weights=_fill(2.0))
        out = update_base(state, _fill(0.0), np.array([1.0, 0.0, 0.0]), self.POLICY)
        assert np.allclose(out.weights.flatten(), 1.9, atol=1e-15)
        rec = out.history[-1]
        assert rec.similarity is None
        assert rec.epsilon == 0.05

    def test_history_is_append_only_and_centroid_advances(self):
        state = BaseModelState(weights=_weights(1))
        c1, c2 = np.array([1.0, 0.0, 0.0]), np.array([0.9, 0.1, 0.0])
        update_base(state, _weights(2), c1, self.POLICY)
        update_base(state, _weights(3), c2, self.POLICY)
        assert state.update_count == 2
        assert len(state.history) == 2
        assert np.array_equal(state.prev_centroid, c2)

    def test_contraction_identity_through_update(self):
        phi, zeta = _weights(7), _weights(8)
        state = BaseModelState(
            weights=phi.copy(), prev_centroid=np.array([1.0, 0.0]), update_count=1
        )
        gap = np.linalg.norm(phi.flatten() - zeta.flatten())
        out = update_base(state, zeta, np.array([1.0, 0.0]), self.POLICY)
        new_gap = np.linalg.norm(out.weights.flatten() - zeta.flatten())
        assert new_gap == pytest.approx((1.0 - 0.3) * gap, abs=1e-12)

    def test_validation(self):
        state = BaseModelState(weights=_weights(1))
        other = init_weights(ModelConfig(4, 3, 3), rng_for(9, "w"))
        with pytest.raises(ValueError):
            update_base(state, other, np.ones(3), self.POLICY)
        with pytest.raises(ValueError):
            update_base(state, _weights(2), np.array([[1.0]]), self.POLICY)
        with pytest.raises(ValueError):
            update_base(state, _weights(2), np.array([np.nan]), self.POLICY)


class TestClone:
    def test_clone_is_deep_for_mutable_parts(self):
        state = BaseModelState(weights=_weights(1), prev_centroid=np.ones(3), update_count=2)
        twin = state.clone()
        twin.weights.w1[0, 0] += 5.0
        twin.prev_centroid[0] = -1.0
        twin.update_count = 9
        assert state.weights.w1[0, 0] != twin.weights.w1[0, 0]
        assert state.prev_centroid[0] == 1.0
        assert state.update_count == 2


class TestPersistence:
    def test_round_trip_is_bit_identical(self, tmp_path):
        state = BaseModelState(weights=_weights(11))
        update_base(state, _weights(12), np.array([1.0, 0.5, 0.0]), EwmaPolicy())
        update_base(state, _weights(13), np.array([0.9, 0.6, 0.1]), EwmaPolicy())
        path = str(tmp_path / "base.json")
        save_base(state, path)
        loaded = load_base(path, CFG)
        assert np.array_equal(loaded.weights.flatten(), state.weights.flatten())
        assert np.array_equal(loaded.prev_centroid, state.prev_centroid)
        assert loaded.update_count == state.update_count
        assert [
            (r.scene_id, r.similarity, r.epsilon) for r in loaded.history
        ] == [(r.scene_id, r.similarity, r.epsilon) for r in state.history]

    def test_model_shape_mismatch_rejected(self, tmp_path):
        state = BaseModelState(weights=_weights(11))
        path = str(tmp_path / "base.json")
        save_base(state, path)
        with pytest.raises(ValueError):
            load_base(path, ModelConfig(5, 3, 2))

    def test_format_version_mismatch_rejected(self, tmp_path):
        import json

        state = BaseModelState(weights=_weights(11))
        path = tmp_path / "base.json"
        save_base(state, str(path))
        doc = json.loads(path.read_text())
        doc["format_version"] = 999
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError):
            load_base(str(path), CFG)
