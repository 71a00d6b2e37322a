"""Monte Carlo simulator unit tests: episode accounting, metrics, determinism."""

import numpy as np
import pytest

from beamplan.beliefs import initial_belief, structured_belief_set
from beamplan.config import ExperimentConfig
from beamplan.mobility import expected_episode_duration, feasible_var_interval
from beamplan.model import BT, ActionSpec
from beamplan.simulate import (
    GeniePolicy,
    HeuristicPolicy,
    SolvedPolicy,
    monte_carlo_metrics,
    run_episode,
)
from beamplan.solver import ValueFunction, pbvi_run


def fast_config(**overrides) -> ExperimentConfig:
    """Small model with quick episodes (high diffusion, short DT blocks)."""
    kw = dict(
        num_sublinks=4,
        dt_powers_dbm=(10.0, 20.0),
        dt_durations_slots=(20, 40),
        max_stages=400,
        eps_v=1e-4,
    )
    kw.update(overrides)
    cfg = ExperimentConfig(**kw)
    lo, hi = feasible_var_interval(cfg.mean_speed_mps, cfg.v_max())
    return ExperimentConfig(**{**kw, "var_speed_mps2": lo + 0.05 * (hi - lo)})


@pytest.fixture(scope="module")
def fast_model():
    return fast_config().build_model()


@pytest.fixture(scope="module")
def default_model():
    return ExperimentConfig().build_model()


def blind_bt_vf(model, lam=1e6) -> ValueFunction:
    cost_part, a_idx = model.blind_bt_policy()
    return ValueFunction.blind(cost_part, a_idx, lam)


class TestEpisodeInvariants:
    @pytest.mark.parametrize("seed", range(10))
    def test_stats_well_formed(self, fast_model, seed):
        for policy in (
            HeuristicPolicy(0.01, 20),
            GeniePolicy(0.01, 20),
            SolvedPolicy(blind_bt_vf(fast_model)),
        ):
            st = run_episode(policy, fast_model, seed)
            assert st.duration_slots >= 1
            assert st.bits >= 0.0
            assert st.energy > 0.0
            assert st.n_bt >= 0 and st.n_dt >= 0

    def test_heuristic_energy_accounting(self, fast_model):
        # Deterministic costs: energy decomposes exactly into the per-class
        # action costs (the heuristic only uses single-beam actions).
        model = fast_model
        policy = HeuristicPolicy(0.01, 20)
        bt_cost = model.action_cost(ActionSpec(BT, 1, 1, model.bt_power_w, 1))
        dt_cost = 0.01 * 19
        for seed in range(20):
            st = run_episode(policy, model, seed)
            assert st.energy == pytest.approx(
                st.n_bt * bt_cost + st.n_dt * dt_cost, rel=1e-12
            )

    def test_genie_accounting(self, fast_model):
        # Every completed block is credited; the block cut short by the road
        # exit is not. Energy is charged for all blocks.
        model = fast_model
        per_block = model.action_bits_on_success(ActionSpec("DT", 1, 1, 0.01, 20))
        for seed in range(20):
            st = run_episode(GeniePolicy(0.01, 20), model, seed)
            assert st.n_bt == 0
            assert st.bits == pytest.approx((st.n_dt - 1) * per_block)
            assert st.energy == pytest.approx(st.n_dt * 0.01 * 19)

    def test_blind_bt_policy_earns_nothing(self, fast_model):
        st = run_episode(SolvedPolicy(blind_bt_vf(fast_model)), fast_model, 3)
        assert st.bits == 0.0
        assert st.n_dt == 0
        # BT advances one micro-slot per action.
        assert st.n_bt == st.duration_slots


class TestDurationCalibration:
    def test_pure_bt_duration_matches_chain_expectation(self, fast_model):
        # The walk is action-independent; a single-slot BT policy samples the
        # raw absorption time, whose mean is known from the fundamental
        # matrix.
        expected = expected_episode_duration(fast_model.one_step)
        m = monte_carlo_metrics(
            SolvedPolicy(blind_bt_vf(fast_model)), fast_model, 20000, 99
        )
        assert m.avg_duration_slots == pytest.approx(expected, rel=0.01)


class TestMetrics:
    def test_rate_zero_for_pure_bt(self, fast_model):
        m = monte_carlo_metrics(
            SolvedPolicy(blind_bt_vf(fast_model)), fast_model, 200, 5
        )
        assert m.avg_rate_bps == 0.0
        assert m.ci_rate_bps == 0.0

    def test_ratio_estimators(self, fast_model):
        m = monte_carlo_metrics(HeuristicPolicy(0.01, 20), fast_model, 300, 5)
        dt = fast_model.radio.delta_t_s
        assert m.avg_rate_bps == pytest.approx(
            m.mean_bits / m.avg_duration_slots / dt
        )
        power_w = 10 ** (m.avg_power_dbm / 10.0) * 1e-3
        assert power_w == pytest.approx(m.mean_energy / m.avg_duration_slots)

    def test_deterministic_given_seed(self, fast_model):
        a = monte_carlo_metrics(HeuristicPolicy(0.01, 20), fast_model, 100, 17)
        b = monte_carlo_metrics(HeuristicPolicy(0.01, 20), fast_model, 100, 17)
        assert a == b
        c = monte_carlo_metrics(HeuristicPolicy(0.01, 20), fast_model, 100, 18)
        assert a.avg_rate_bps != c.avg_rate_bps

    def test_ci_shrinks_with_episodes(self, fast_model):
        small = monte_carlo_metrics(HeuristicPolicy(0.01, 20), fast_model, 200, 7)
        large = monte_carlo_metrics(HeuristicPolicy(0.01, 20), fast_model, 800, 7)
        # Quadrupling episodes should roughly halve the interval.
        assert large.ci_rate_bps < 0.75 * small.ci_rate_bps

    def test_episode_count_validated(self, fast_model):
        with pytest.raises(ValueError):
            monte_carlo_metrics(HeuristicPolicy(0.01, 20), fast_model, 0, 1)


class TestGenieBound:
    def test_genie_tops_heuristic_and_solved(self):
        cfg = fast_config()
        model = cfg.build_model()
        beliefs = structured_belief_set(4, 4)
        b0 = initial_belief(4)
        run = pbvi_run(
            beliefs, model.tables, b0, 1e5, cfg.solver_params(),
            np.random.RandomState(0),
        )
        episodes, seed = 400, 3
        genie = max(
            monte_carlo_metrics(GeniePolicy(p, t), model, episodes, seed).avg_rate_bps
            for p in (0.01, 0.1)
            for t in (20, 40)
        )
        heur = monte_carlo_metrics(
            HeuristicPolicy(0.1, 20), model, episodes, seed
        ).avg_rate_bps
        solved = monte_carlo_metrics(
            SolvedPolicy(run.vf), model, episodes, seed
        ).avg_rate_bps
        assert genie >= heur
        assert genie >= solved


class TestMismatchedEnvironment:
    def test_worse_detection_degrades_heuristic(self, default_model):
        from dataclasses import replace

        cfg = ExperimentConfig()
        env = replace(cfg, p_fa=0.1, p_md=0.1).build_model()
        nominal = monte_carlo_metrics(
            HeuristicPolicy(0.01, 1000), default_model, 150, 4
        )
        degraded = monte_carlo_metrics(
            HeuristicPolicy(0.01, 1000), default_model, 150, 4, env_model=env
        )
        assert degraded.avg_rate_bps < nominal.avg_rate_bps

    def test_geometry_mismatch_rejected(self, fast_model, default_model):
        with pytest.raises(ValueError):
            run_episode(
                HeuristicPolicy(0.01, 20), fast_model, 1, env_model=default_model
            )


class TestBackendParity:
    def test_numpy_backend_reproduces_episodes(self, fast_model):
        # The numba and pure-numpy backends must draw identical random
        # streams and hence produce identical episode statistics.
        import json
        import os
        import subprocess
        import sys

        script = """
import json
from tests.test_simulate import fast_config, blind_bt_vf
from beamplan.simulate import HeuristicPolicy, GeniePolicy, SolvedPolicy, run_episode
import beamplan.kernels as kernels

model = fast_config().build_model()
out = {"backend": kernels.BACKEND, "stats": []}
for seed in range(5):
    for tag, policy in (
        ("heur", HeuristicPolicy(0.01, 20)),
        ("genie", GeniePolicy(0.01, 20)),
        ("solved", SolvedPolicy(blind_bt_vf(model))),
    ):
        st = run_episode(policy, model, seed)
        out["stats"].append([tag, seed, st.bits, st.energy, st.duration_slots])
print(json.dumps(out))
"""
        results = {}
        for backend in ("numba", "numpy"):
            env = dict(os.environ, BEAMPLAN_BACKEND=backend)
            proc = subprocess.run(
                [sys.executable, "-c", script],
                capture_output=True, text=True, env=env,
                cwd=os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
            )
            assert proc.returncode == 0, proc.stderr
            payload = json.loads(proc.stdout)
            assert payload["backend"] == backend
            results[backend] = payload["stats"]
        assert results["numba"] == results["numpy"]
