"""POMDP assembly unit tests: action set, kernels, rewards, costs."""

import math

import numpy as np
import pytest

from beamplan.config import ExperimentConfig
from beamplan.linkbudget import achievable_rate
from beamplan.mobility import expected_absorption_times, stay_probability
from beamplan.model import BT, DT, ActionSpec, BeamModel, Obs, enumerate_actions


def small_model(num_sublinks=4, **overrides) -> BeamModel:
    kw = dict(num_sublinks=num_sublinks)
    kw.update(overrides)
    return ExperimentConfig(**kw).build_model()


@pytest.fixture(scope="module")
def default_model() -> BeamModel:
    return ExperimentConfig().build_model()


class TestActionSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            ActionSpec("XX", 1, 1, 0.1, 1)
        with pytest.raises(ValueError):
            ActionSpec(DT, 3, 2, 0.1, 1000)
        with pytest.raises(ValueError):
            ActionSpec(DT, 1, 1, 0.1, 0)
        with pytest.raises(ValueError):
            ActionSpec(BT, 1, 1, 0.1, 2)  # beam training is single-slot

    def test_width(self):
        assert ActionSpec(DT, 2, 5, 0.1, 10).width == 4


class TestEnumerateActions:
    def test_default_count(self):
        # 55 consecutive supports x (1 BT + 9 DT power/duration pairs).
        actions = enumerate_actions(10, 0.002, [0.01, 0.1, 1.0], [1000, 2000, 3000])
        assert len(actions) == 550
        assert sum(a.kind == BT for a in actions) == 55
        assert sum(a.kind == DT for a in actions) == 495

    def test_supports_consecutive_and_complete(self):
        actions = enumerate_actions(4, 0.002, [0.1], [10])
        supports = {(a.lo, a.hi) for a in actions}
        assert supports == {
            (lo, hi) for lo in range(1, 5) for hi in range(lo, 5)
        }

    def test_canonical_order_deterministic(self):
        a1 = enumerate_actions(5, 0.002, [0.1, 0.01], [20, 10])
        a2 = enumerate_actions(5, 0.002, [0.01, 0.1], [10, 20])
        assert a1 == a2
        assert a1 == sorted(a1)

    def test_empty_sets_rejected(self):
        with pytest.raises(ValueError):
            enumerate_actions(4, 0.002, [], [10])
        with pytest.raises(ValueError):
            enumerate_actions(4, 0.002, [0.1], [])


class TestRewardAndCost:
    def test_dt_cost_formula(self, default_model):
        # One transmit slot is reserved for feedback: T - 1 paid slots.
        a = ActionSpec(DT, 3, 3, 0.1, 2000)
        assert default_model.action_cost(a) == pytest.approx(0.1 * 1999)
        wide = ActionSpec(DT, 2, 5, 0.01, 1000)
        assert default_model.action_cost(wide) == pytest.approx(0.01 * 4 * 999)

    def test_bt_cost_formula(self, default_model):
        p_min = default_model.bt_power_w
        assert default_model.action_cost(
            ActionSpec(BT, 1, 1, p_min, 1)
        ) == pytest.approx(p_min)
        assert default_model.action_cost(
            ActionSpec(BT, 1, 4, p_min, 1)
        ) == pytest.approx(4 * p_min)

    def test_bits_on_success(self, default_model):
        radio = default_model.radio
        a = ActionSpec(DT, 2, 2, 0.1, 1000)
        expected = achievable_rate(radio, 0.1, 1) * radio.delta_t_s * 999
        assert default_model.action_bits_on_success(a) == pytest.approx(expected)
        # Spreading the same per-beam power over a wider beam delivers the
        # same rate (power scales with the number of beams).
        wide = ActionSpec(DT, 2, 4, 0.1, 1000)
        assert default_model.action_bits_on_success(wide) == pytest.approx(
            achievable_rate(radio, 0.3, 3) * radio.delta_t_s * 999
        )

    def test_bt_delivers_no_bits(self, default_model):
        a = ActionSpec(BT, 1, 1, default_model.bt_power_w, 1)
        assert default_model.action_bits_on_success(a) == 0.0


class TestTables:
    def test_shapes(self, default_model):
        t = default_model.tables
        assert t.trans.shape == (550, 11, 11)
        assert t.obs.shape == (550, 3, 11, 11)
        assert t.reward.shape == (550, 11)
        assert t.cost.shape == (550, 11)

    def test_transition_is_duration_power(self):
        model = small_model()
        for ai, act in enumerate(model.actions[:40]):
            expected = np.linalg.matrix_power(model.one_step, act.duration)
            np.testing.assert_allclose(model.tables.trans[ai], expected, atol=1e-12)

    def test_observation_normalized(self, default_model):
        sums = default_model.tables.obs.sum(axis=1)
        np.testing.assert_allclose(sums, 1.0, atol=1e-12)

    def test_exit_observed_with_certainty(self, default_model):
        t = default_model.tables
        s_bar = default_model.num_sublinks
        assert np.all(t.obs[:, Obs.EXIT, s_bar, :] == 1.0)
        assert np.all(t.obs[:, Obs.EXIT, :, s_bar] == 1.0)
        # And never otherwise.
        assert np.all(t.obs[:, Obs.EXIT, :s_bar, :s_bar] == 0.0)

    def test_bt_ack_probabilities(self, default_model):
        model = default_model
        ai = model.actions.index(ActionSpec(BT, 2, 4, model.bt_power_w, 1))
        obs = model.tables.obs[ai]
        # Both endpoints inside the support: detection probability.
        assert obs[Obs.ACK, 1, 2] == pytest.approx(1.0 - model.detection.p_md)
        # Either endpoint outside: false alarm probability.
        assert obs[Obs.ACK, 0, 1] == pytest.approx(model.detection.p_fa)
        assert obs[Obs.ACK, 1, 5] == pytest.approx(model.detection.p_fa)
        np.testing.assert_allclose(
            obs[Obs.NACK, :4, :4], 1.0 - obs[Obs.ACK, :4, :4], atol=1e-12
        )

    def test_dt_ack_is_stay_probability(self):
        model = small_model()
        act = ActionSpec(DT, 2, 3, 0.01, 1000)
        ai = model.actions.index(act)
        obs = model.tables.obs[ai]
        for s in range(model.num_sublinks):
            for s_next in range(model.num_sublinks):
                want = stay_probability(
                    model.one_step, s + 1, s_next + 1, (2, 3), 1000
                )
                assert obs[Obs.ACK, s, s_next] == pytest.approx(want, abs=1e-10)

    def test_reward_rows(self, default_model):
        model = default_model
        t = model.tables
        s_bar = model.num_sublinks
        for ai, act in enumerate(model.actions[:60]):
            if act.kind == BT:
                assert np.all(t.reward[ai] == 0.0)
            else:
                rest = model.power_cache.power(act.duration, (act.lo, act.hi))
                expected = model.action_bits_on_success(act) * rest.sum(axis=1)
                np.testing.assert_allclose(t.reward[ai], expected, atol=1e-9)

    def test_cost_zero_at_exit(self, default_model):
        t = default_model.tables
        s_bar = default_model.num_sublinks
        assert np.all(t.cost[:, s_bar] == 0.0)
        assert np.all(t.reward[:, s_bar] == 0.0)
        # Transient-state cost is state-independent and positive.
        assert np.all(t.cost[:, :s_bar] > 0.0)
        assert np.all(t.cost[:, :s_bar] == t.cost[:, :1])

    def test_lagrangian(self, default_model):
        t = default_model.tables
        lam = 1e5
        np.testing.assert_allclose(t.lagrangian(lam), t.reward - lam * t.cost)

    def test_accessors(self, default_model):
        m = default_model
        assert m.observation_prob(Obs.EXIT, m.num_sublinks, 0, 0) == 1.0
        assert m.expected_reward(m.num_sublinks, 5) == 0.0
        assert m.expected_cost(0, 0) > 0.0


class TestBlindPolicySeed:
    def test_cost_part_is_scaled_absorption_time(self):
        model = small_model()
        cost_part, a_idx = model.blind_bt_policy()
        tau = expected_absorption_times(model.one_step)
        np.testing.assert_allclose(
            cost_part[: model.num_sublinks], model.bt_power_w * tau
        )
        assert cost_part[model.num_sublinks] == 0.0
        act = model.actions[a_idx]
        assert (act.kind, act.lo, act.hi, act.duration) == (BT, 1, 1, 1)


class TestSimArrays:
    def test_flat_arrays_consistent(self, default_model):
        m = default_model
        assert m.n_act == len(m.actions)
        for i, a in enumerate(m.actions):
            assert m.act_lo0[i] == a.lo - 1
            assert m.act_hi0[i] == a.hi - 1
            assert m.act_duration[i] == a.duration
            assert m.act_is_bt[i] == (a.kind == BT)
            assert m.act_cost[i] == pytest.approx(m.action_cost(a))
            assert m.act_bits[i] == pytest.approx(m.action_bits_on_success(a))
