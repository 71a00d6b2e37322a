"""Monte Carlo episode simulation and rate/power metric aggregation.

Policies: solved alpha-vector policies, the scan-then-transmit heuristic,
and the genie upper bound that tracks the true state. The hidden walk and
the solved-policy decision loop run in the kernels backend (numba when
available); the scripted policies drive the walk kernel from Python.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .beliefs import ImpossibleObservationError
from .linkbudget import watt_to_dbm
from .model import BT, DT, BeamModel
from .solver import ValueFunction

# Hard ceiling on episode length, in multiples of the expected duration.
_SLOT_LIMIT_FACTOR = 1000


@dataclass(frozen=True)
class SolvedPolicy:
    vf: ValueFunction

    def __post_init__(self) -> None:
        if len(self.vf) == 0:
            raise ValueError("solved policy needs a non-empty value function")


@dataclass(frozen=True)
class HeuristicPolicy:
    power_w: float
    t_dt: int


@dataclass(frozen=True)
class GeniePolicy:
    power_w: float
    t_dt: int


Policy = SolvedPolicy | HeuristicPolicy | GeniePolicy


@dataclass
class EpisodeStats:
    bits: float
    energy: float
    duration_slots: int
    n_bt: int
    n_dt: int


def _action_lookup(model: BeamModel) -> dict:
    return {
        (a.kind, a.lo, a.hi, a.power_w, a.duration): i
        for i, a in enumerate(model.actions)
    }


def _slot_limit(model: BeamModel) -> int:
    from .mobility import expected_episode_duration

    return int(expected_episode_duration(model.one_step) * _SLOT_LIMIT_FACTOR) + 1000


def run_episode(
    policy: Policy,
    model: BeamModel,
    seed: int,
    env_model: BeamModel | None = None,
) -> EpisodeStats:
    """Simulate one transmission episode from road entry to exit.

    env_model, when given, supplies the ground-truth mobility and detection
    statistics while the policy keeps planning (and belief filtering) with
    `model`. This evaluates robustness to model mismatch; the two models
    must share the geometry and action set.
    """
    env = env_model if env_model is not None else model
    if env.num_sublinks != model.num_sublinks or env.n_act != model.n_act:
        raise ValueError("environment model must share geometry and actions")
    if isinstance(policy, SolvedPolicy):
        return _run_solved(policy, model, env, seed)
    if isinstance(policy, HeuristicPolicy):
        return _run_heuristic(policy, model, env, seed)
    if isinstance(policy, GeniePolicy):
        return _run_genie(policy, model, env, seed)
    raise TypeError(f"unknown policy type {type(policy)!r}")


def _run_solved(
    policy: SolvedPolicy, model: BeamModel, env: BeamModel, seed: int
) -> EpisodeStats:
    vf = policy.vf
    bits, energy, duration, n_bt, n_dt, status = kernels.solved_episode(
        np.ascontiguousarray(vf.values),
        vf.actions.astype(np.int64),
        np.ascontiguousarray(model.tables.lagrangian(vf.lam)),
        np.ascontiguousarray(model.tables.weights),
        model.act_lo0,
        model.act_hi0,
        model.act_duration,
        model.act_cost,
        model.act_bits,
        model.act_is_bt,
        env.mobility.p,
        env.mobility.q,
        1.0 - env.detection.p_md,
        env.detection.p_fa,
        model.num_sublinks,
        seed,
        _slot_limit(env),
    )
    if status == kernels.STATUS_IMPOSSIBLE_OBS:
        raise ImpossibleObservationError(
            "zero-probability observation during solved-policy episode"
        )
    if status == kernels.STATUS_SLOT_LIMIT:
        raise RuntimeError("episode exceeded the slot limit before absorption")
    return EpisodeStats(bits, energy, int(duration), int(n_bt), int(n_dt))


def _run_genie(
    policy: GeniePolicy, model: BeamModel, env: BeamModel, seed: int
) -> EpisodeStats:
    """Idealized upper bound: the transmitter always knows the user's
    sub-link, so its beam follows the user and every data block that
    completes before road exit is credited in full. The final block, cut
    short by the exit, earns nothing; energy is charged for every block."""
    lookup = _action_lookup(model)
    kernels.seed_stream(seed)
    s_exit = model.num_sublinks
    p, q = env.mobility.p, env.mobility.q
    state = 0
    t = 0
    bits = energy = 0.0
    n_dt = 0
    duration = -1
    while True:
        a_idx = lookup[(DT, state + 1, state + 1, policy.power_w, policy.t_dt)]
        state, _, absorbed = kernels.walk_segment(
            state, policy.t_dt, p, q, s_exit, 0, s_exit
        )
        if absorbed >= 0:
            duration = t + absorbed
        t += policy.t_dt
        energy += model.act_cost[a_idx]
        n_dt += 1
        if state != s_exit:
            bits += model.act_bits[a_idx]
        else:
            break
    return EpisodeStats(bits, energy, duration, 0, n_dt)


def _scan_targets(center: int, num_sublinks: int) -> list[int]:
    """Expanding-ring probe order around a lost center: -1,+1,-2,+2,...,0.

    Offsets falling outside the road are skipped; the list is cycled until an
    ACK (or exit) ends the scan. Including the center last covers the case
    where the NACK that triggered the scan was itself an error.
    """
    targets = []
    for r in range(1, num_sublinks):
        for off in (-r, r):
            s = center + off
            if 0 <= s < num_sublinks:
                targets.append(s)
    targets.append(center)
    return targets


def _run_heuristic(
    policy: HeuristicPolicy, model: BeamModel, env: BeamModel, seed: int
) -> EpisodeStats:
    lookup = _action_lookup(model)
    kernels.seed_stream(seed)
    s_exit = model.num_sublinks
    p, q = env.mobility.p, env.mobility.q
    p_d = 1.0 - env.detection.p_md
    p_fa = env.detection.p_fa
    bt_dur = 1

    state = 0
    center = 0
    mode = "probe"  # probe center, then scan on NACK
    scan: list[int] = []
    scan_ptr = 0
    t = 0
    bits = energy = 0.0
    n_bt = n_dt = 0
    duration = -1
    limit = _slot_limit(env)

    while True:
        if mode == "dt":
            target = center
            a_idx = lookup[(DT, target + 1, target + 1, policy.power_w, policy.t_dt)]
            dur = policy.t_dt
        else:
            target = center if mode == "probe" else scan[scan_ptr]
            a_idx = lookup[(BT, target + 1, target + 1, model.bt_power_w, 1)]
            dur = bt_dur

        s0 = state
        state, stayed, absorbed = kernels.walk_segment(
            state, dur, p, q, s_exit, target, target
        )
        if absorbed >= 0:
            duration = t + absorbed
        t += dur
        energy += model.act_cost[a_idx]

        if mode == "dt":
            n_dt += 1
            if stayed:
                bits += model.act_bits[a_idx]
        else:
            n_bt += 1

        if state == s_exit:
            break
        if t > limit:
            raise RuntimeError("episode exceeded the slot limit before absorption")

        if mode == "dt":
            ack = stayed == 1
            if not ack:
                scan = _scan_targets(center, model.num_sublinks)
                scan_ptr = 0
                mode = "scan"
        else:
            pair_in = s0 == target and state == target
            p_ack = p_d if pair_in else p_fa
            ack = kernels.draw_uniform() < p_ack
            if ack:
                center = target
                mode = "dt"
            elif mode == "probe":
                scan = _scan_targets(center, model.num_sublinks)
                scan_ptr = 0
                mode = "scan"
            else:
                scan_ptr = (scan_ptr + 1) % len(scan)

    return EpisodeStats(bits, energy, duration, n_bt, n_dt)


@dataclass
class MetricsResult:
    avg_rate_bps: float
    avg_power_dbm: float
    avg_duration_slots: float
    ci_rate_bps: float
    ci_power_dbm: float
    episodes: int
    seed: int
    mean_bits: float
    mean_energy: float


def _episode_seed(master: int, idx: int) -> int:
    return int(np.random.SeedSequence([master, idx]).generate_state(1)[0])


def monte_carlo_metrics(
    policy: Policy,
    model: BeamModel,
    episodes: int,
    seed: int,
    bootstrap: int = 1000,
    env_model: BeamModel | None = None,
) -> MetricsResult:
    """Average rate (bit/s) and power (dBm) over independent seeded episodes.

    Rate and power are the ratio estimators mean(bits)/mean(duration)/dt and
    mean(energy)/mean(duration); 95% confidence half-widths come from a
    seeded nonparametric bootstrap over episodes. env_model is forwarded to
    run_episode for mismatched-environment evaluation.
    """
    if episodes < 1:
        raise ValueError(f"episodes must be >= 1, got {episodes}")
    bits = np.empty(episodes)
    energy = np.empty(episodes)
    dur = np.empty(episodes)
    for i in range(episodes):
        st = run_episode(policy, model, _episode_seed(seed, i), env_model=env_model)
        bits[i] = st.bits
        energy[i] = st.energy
        dur[i] = st.duration_slots

    dt = model.radio.delta_t_s
    rate = bits.mean() / dur.mean() / dt
    power_w = energy.mean() / dur.mean()

    rng = np.random.RandomState(
        np.random.SeedSequence([seed, 0xB007]).generate_state(1)[0]
    )
    rates = np.empty(bootstrap)
    powers = np.empty(bootstrap)
    for k in range(bootstrap):
        idx = rng.randint(episodes, size=episodes)
        d = dur[idx].mean()
        rates[k] = bits[idx].mean() / d / dt
        powers[k] = energy[idx].mean() / d
    rate_lo, rate_hi = np.percentile(rates, [2.5, 97.5])
    pow_lo, pow_hi = np.percentile(powers, [2.5, 97.5])

    return MetricsResult(
        avg_rate_bps=float(rate),
        avg_power_dbm=watt_to_dbm(power_w),
        avg_duration_slots=float(dur.mean()),
        ci_rate_bps=float((rate_hi - rate_lo) / 2.0),
        ci_power_dbm=float((watt_to_dbm(pow_hi) - watt_to_dbm(pow_lo)) / 2.0),
        episodes=episodes,
        seed=seed,
        mean_bits=float(bits.mean()),
        mean_energy=float(energy.mean()),
    )
