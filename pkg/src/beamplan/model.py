"""POMDP assembly: action enumeration, transition/observation kernels, tables.

States are 0-indexed: sub-links 0..S-1 and the absorbing exit state at
index S. Observations are ACK=0, NACK=1, EXIT=2 for the beam model; the
generic table container supports any finite observation alphabet so that
solver components can be exercised on arbitrary POMDPs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .linkbudget import (
    DetectionSpec,
    RadioConfig,
    achievable_rate,
    min_bt_power,
)
from .mobility import (
    MatrixPowerCache,
    MobilityParams,
    expected_absorption_times,
    one_step_matrix,
)

BT = "BT"
DT = "DT"


class Obs(IntEnum):
    ACK = 0
    NACK = 1
    EXIT = 2


@dataclass(frozen=True, order=True)
class ActionSpec:
    """One POMDP action: class, consecutive beam support, power, duration.

    The field order makes dataclass ordering the canonical action ordering:
    (class, lo, hi, power, duration). Support bounds are 1-based inclusive.
    """

    kind: str
    lo: int
    hi: int
    power_w: float
    duration: int

    def __post_init__(self) -> None:
        if self.kind not in (BT, DT):
            raise ValueError(f"unknown action class {self.kind!r}")
        if not 1 <= self.lo <= self.hi:
            raise ValueError(f"invalid support [{self.lo}, {self.hi}]")
        if self.duration < 1:
            raise ValueError(f"duration must be >= 1, got {self.duration}")
        if self.kind == BT and self.duration != 1:
            raise ValueError("BT actions are single micro-slot")

    @property
    def width(self) -> int:
        return self.hi - self.lo + 1


def enumerate_actions(
    num_sublinks: int,
    bt_power_w: float,
    dt_powers_w: list[float],
    dt_durations: list[int],
) -> list[ActionSpec]:
    """All actions over consecutive supports, in canonical order.

    S(S+1)/2 supports; one BT action plus one DT action per (power, duration)
    pair for each support.
    """
    if not dt_powers_w or not dt_durations:
        raise ValueError("DT power and duration sets must be non-empty")
    actions = []
    for lo in range(1, num_sublinks + 1):
        for hi in range(lo, num_sublinks + 1):
            actions.append(ActionSpec(BT, lo, hi, bt_power_w, 1))
            for p_w in dt_powers_w:
                for t in dt_durations:
                    actions.append(ActionSpec(DT, lo, hi, p_w, t))
    actions.sort()
    return actions


@dataclass
class PomdpTables:
    """Dense POMDP tables shared by the belief filter and the solver.

    trans[a, s, s']     transition probability under action a
    obs[a, o, s, s']    observation probability given (s, a, s')
    reward[a, s]        expected reward
    cost[a, s]          expected (deterministic) cost
    """

    trans: np.ndarray
    obs: np.ndarray
    reward: np.ndarray
    cost: np.ndarray

    def __post_init__(self) -> None:
        a, s, s2 = self.trans.shape
        if s != s2 or self.obs.shape[0] != a or self.obs.shape[2:] != (s, s):
            raise ValueError("inconsistent table shapes")
        if self.reward.shape != (a, s) or self.cost.shape != (a, s):
            raise ValueError("inconsistent reward/cost shapes")
        obs_sums = self.obs.sum(axis=1)
        if np.abs(obs_sums - 1.0).max() > 1e-12:
            raise ValueError("observation kernel does not sum to 1 over o")
        # Back-projection weights P(o|s,a,s') * P(s'|s,a), precomputed once.
        self.weights = self.obs * self.trans[:, None, :, :]

    @property
    def n_actions(self) -> int:
        return self.trans.shape[0]

    @property
    def n_states(self) -> int:
        return self.trans.shape[1]

    @property
    def n_obs(self) -> int:
        return self.obs.shape[1]

    def lagrangian(self, lam: float) -> np.ndarray:
        """Per-action, per-state Lagrangian payoff r - lam * c."""
        return self.reward - lam * self.cost


class BeamModel:
    """The full beam-training/data-transmission POMDP for one configuration."""

    def __init__(
        self,
        radio: RadioConfig,
        mobility: MobilityParams,
        detection: DetectionSpec,
        dt_powers_w: list[float],
        dt_durations: list[int],
    ) -> None:
        self.radio = radio
        self.mobility = mobility
        self.detection = detection
        self.bt_power_w = min_bt_power(radio, detection)
        self.actions = enumerate_actions(
            radio.num_sublinks, self.bt_power_w, dt_powers_w, dt_durations
        )
        self.one_step = one_step_matrix(
            mobility.p, mobility.q, radio.num_sublinks
        )
        self.power_cache = MatrixPowerCache(self.one_step)
        self.tables = self._build_tables()
        self._build_sim_arrays()

    @property
    def num_sublinks(self) -> int:
        return self.radio.num_sublinks

    @property
    def n_states(self) -> int:
        return self.radio.num_sublinks + 1

    def action_bits_on_success(self, a: ActionSpec) -> float:
        """Bits delivered by one successful DT block (0 for BT)."""
        if a.kind == BT:
            return 0.0
        rate = achievable_rate(self.radio, a.power_w * a.width, a.width)
        return rate * self.radio.delta_t_s * (a.duration - 1)

    def action_cost(self, a: ActionSpec) -> float:
        """Deterministic energy cost (W * micro-slots) of one action."""
        if a.kind == BT:
            return a.power_w * a.width
        return a.power_w * a.width * (a.duration - 1)

    def _build_tables(self) -> PomdpTables:
        s_bar = self.num_sublinks
        n = self.n_states
        n_act = len(self.actions)
        trans = np.empty((n_act, n, n))
        obs = np.zeros((n_act, 3, n, n))
        reward = np.zeros((n_act, n))
        cost = np.zeros((n_act, n))

        p_d = 1.0 - self.detection.p_md
        p_fa = self.detection.p_fa

        for ai, act in enumerate(self.actions):
            support = (act.lo, act.hi)
            full_n = self.power_cache.power(act.duration)
            rest_n = self.power_cache.power(act.duration, support)
            trans[ai] = full_n

            # Exit is observed with certainty whenever either endpoint is the
            # absorbing state.
            exit_pair = np.zeros((n, n), dtype=bool)
            exit_pair[s_bar, :] = True
            exit_pair[:, s_bar] = True
            obs[ai, Obs.EXIT][exit_pair] = 1.0

            if act.kind == BT:
                insup = np.zeros(n, dtype=bool)
                insup[act.lo - 1 : act.hi] = True
                ack = np.where(np.outer(insup, insup), p_d, p_fa)
            else:
                with np.errstate(invalid="ignore", divide="ignore"):
                    ack = np.where(full_n > 0.0, rest_n / full_n, 0.0)
            obs[ai, Obs.ACK] = np.where(exit_pair, 0.0, ack)
            obs[ai, Obs.NACK] = np.where(exit_pair, 0.0, 1.0 - ack)

            if act.kind == DT:
                reward[ai, :] = self.action_bits_on_success(act) * rest_n.sum(axis=1)
            cost[ai, :s_bar] = self.action_cost(act)

        return PomdpTables(trans=trans, obs=obs, reward=reward, cost=cost)

    def _build_sim_arrays(self) -> None:
        """Flat per-action arrays consumed by the episode kernels."""
        n_act = len(self.actions)
        self.act_lo0 = np.array([a.lo - 1 for a in self.actions], dtype=np.int64)
        self.act_hi0 = np.array([a.hi - 1 for a in self.actions], dtype=np.int64)
        self.act_duration = np.array([a.duration for a in self.actions], dtype=np.int64)
        self.act_is_bt = np.array([a.kind == BT for a in self.actions], dtype=np.bool_)
        self.act_cost = np.array([self.action_cost(a) for a in self.actions])
        self.act_bits = np.array(
            [self.action_bits_on_success(a) for a in self.actions]
        )
        self.n_act = n_act

    def blind_bt_policy(self) -> tuple[np.ndarray, int]:
        """Cheapest blind stationary policy: train on beam 1 until road exit.

        Returns the per-state expected remaining energy of that policy and
        the action's index; used to seed value iteration with an achievable
        lower bound at any multiplier.
        """
        cost_part = np.zeros(self.n_states)
        cost_part[: self.num_sublinks] = self.bt_power_w * expected_absorption_times(
            self.one_step
        )
        a_idx = self.actions.index(ActionSpec(BT, 1, 1, self.bt_power_w, 1))
        return cost_part, a_idx

    def observation_prob(self, o: int, s: int, a_idx: int, s_next: int) -> float:
        """P(o | s, a, s') with 0-based states (exit state = S)."""
        return float(self.tables.obs[a_idx, o, s, s_next])

    def expected_reward(self, s: int, a_idx: int) -> float:
        return float(self.tables.reward[a_idx, s])

    def expected_cost(self, s: int, a_idx: int) -> float:
        return float(self.tables.cost[a_idx, s])
