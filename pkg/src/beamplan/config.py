"""Experiment configuration: parsing, validation, defaults, model assembly.

The config file is a YAML tree. Field names carry unit suffixes (_dbm, _hz,
_slots, _mps) so that unit mistakes are visible at the config boundary; all
internal math is SI (watts, Hz, radians, seconds).

Defaults reproduce the reference evaluation setup: Theta=120 deg, d0=10 m,
W_tot=400 MHz, fc=60 GHz, xi=1, N0=-174 dBm/Hz, S=10, dt=10 us, E[v]=20 m/s,
P_DT in {10,20,30} dBm, T_DT in {1000,2000,3000} slots, T_BT=1.

The speed variance is not pinned by the evaluation setup, so it defaults to
a point 0.1% of the way across the feasible Var[v] interval (for the
default geometry this gives a per-slot move probability p + q of about
1e-3). The midpoint of the interval would make the walk diffuse tens of
sub-links per DT block, under which no data transmission can ever succeed;
the low-diffusion default keeps the model in the regime where the
beam-width/duration trade-off is meaningful: narrow beams lose the user
within a block often enough that beam training and beam widening pay off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .beliefs import structured_belief_set, random_belief_set
from .linkbudget import DetectionSpec, RadioConfig, dbm_to_watt
from .mobility import MobilityParams, feasible_var_interval
from .model import BeamModel, Obs
from .solver import SolverParams

# Default Var[v] sits this fraction of the way across the feasible interval,
# just above the low-diffusion edge (for the default geometry this puts the
# per-slot move probability p + q near 1e-3).
DEFAULT_VAR_FRACTION = 1e-3


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field path."""


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _get(d: dict, key: str, path: str, default=None):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected a mapping")
    return d.get(key, default)


def _num(d: dict, key: str, path: str, default):
    val = _get(d, key, path, default)
    if val is None:
        return None
    _require(isinstance(val, (int, float)) and not isinstance(val, bool),
             f"{path}.{key}", f"expected a number, got {val!r}")
    return float(val)


def _int(d: dict, key: str, path: str, default):
    val = _get(d, key, path, default)
    _require(isinstance(val, int) and not isinstance(val, bool),
             f"{path}.{key}", f"expected an integer, got {val!r}")
    return val


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment configuration."""

    theta_deg: float = 120.0
    d0_m: float = 10.0
    num_sublinks: int = 10
    w_tot_hz: float = 400e6
    fc_hz: float = 60e9
    xi: float = 1.0
    n0_dbm_hz: float = -174.0
    delta_t_s: float = 1e-5

    mean_speed_mps: float = 20.0
    var_speed_mps2: float | None = None

    p_fa: float = 0.001
    p_md: float = 0.001

    dt_powers_dbm: tuple[float, ...] = (10.0, 20.0, 30.0)
    dt_durations_slots: tuple[int, ...] = (1000, 2000, 3000)
    t_bt_slots: int = 1

    lambda0: float = 0.0
    alpha0: float = 100.0
    cost_budget: float | None = None
    eps_v: float = 1e-3
    eps_c: float = 0.05
    max_stages: int = 1500
    lambda_grid: tuple[float, ...] = tuple(float(x) for x in np.logspace(5, 11, 13))
    solver_seed: int = 0

    episodes: int = 10_000
    sim_seed: int = 12345
    # Detection error probabilities the sweep evaluates each solved policy
    # under (policies are solved at the model's own (p_fa, p_md); other
    # entries are mismatched-environment evaluations).
    sim_epsilons: tuple[float, ...] = (0.001, 0.1)

    belief_strategy: str = "structured"
    belief_width: int | None = None
    belief_count: int | None = None
    belief_seed: int = 7

    def __post_init__(self) -> None:
        _require(0.0 < self.theta_deg < 180.0, "radio.theta_deg", "must be in (0, 180)")
        _require(self.d0_m > 0.0, "radio.d0_m", "must be positive")
        _require(self.num_sublinks >= 1, "radio.num_sublinks", "must be >= 1")
        _require(self.w_tot_hz > 0.0, "radio.w_tot_hz", "must be positive")
        _require(self.fc_hz > 0.0, "radio.fc_hz", "must be positive")
        _require(0.0 < self.xi <= 1.0, "radio.xi", "must be in (0, 1]")
        _require(self.delta_t_s > 0.0, "radio.delta_t_s", "must be positive")
        _require(self.mean_speed_mps > 0.0, "mobility.mean_speed_mps", "must be positive")
        _require(0.0 < self.p_fa < 1.0, "detection.p_fa", "must be strictly inside (0, 1)")
        _require(0.0 < self.p_md < 1.0, "detection.p_md", "must be strictly inside (0, 1)")
        _require(len(self.dt_powers_dbm) > 0, "actions.dt_powers_dbm", "must be non-empty")
        _require(len(self.dt_durations_slots) > 0,
                 "actions.dt_durations_slots", "must be non-empty")
        _require(all(t >= 2 for t in self.dt_durations_slots),
                 "actions.dt_durations_slots",
                 "DT needs at least one transmit slot plus the feedback slot")
        _require(self.t_bt_slots == 1, "actions.t_bt_slots",
                 "only single-slot beam training is modeled")
        _require(self.eps_v > 0.0, "solver.eps_v", "must be positive")
        _require(self.eps_c > 0.0, "solver.eps_c", "must be positive")
        _require(self.max_stages >= 1, "solver.max_stages", "must be >= 1")
        _require(len(self.lambda_grid) > 0, "solver.lambda_grid", "must be non-empty")
        _require(list(self.lambda_grid) == sorted(self.lambda_grid),
                 "solver.lambda_grid", "must be sorted ascending")
        _require(self.episodes >= 1, "sim.episodes", "must be >= 1")
        _require(len(self.sim_epsilons) > 0, "sim.epsilons", "must be non-empty")
        _require(all(0.0 < e < 1.0 for e in self.sim_epsilons),
                 "sim.epsilons", "entries must be strictly inside (0, 1)")
        _require(self.belief_strategy in ("structured", "random"),
                 "belief.strategy", "must be 'structured' or 'random'")
        if self.belief_width is not None:
            _require(1 <= self.belief_width <= self.num_sublinks,
                     "belief.width", f"must be in 1..{self.num_sublinks}")
        if self.cost_budget is not None:
            _require(self.cost_budget > 0.0, "solver.cost_budget", "must be positive")

    # -- assembly ---------------------------------------------------------

    def radio(self) -> RadioConfig:
        return RadioConfig(
            theta_rad=math.radians(self.theta_deg),
            d0_m=self.d0_m,
            num_sublinks=self.num_sublinks,
            w_tot_hz=self.w_tot_hz,
            fc_hz=self.fc_hz,
            xi=self.xi,
            n0_dbm_hz=self.n0_dbm_hz,
            delta_t_s=self.delta_t_s,
        )

    def v_max(self) -> float:
        radio = self.radio()
        return radio.delta_s_m / radio.delta_t_s

    def resolved_var_speed(self) -> float:
        if self.var_speed_mps2 is not None:
            return self.var_speed_mps2
        lo, hi = feasible_var_interval(self.mean_speed_mps, self.v_max())
        return lo + DEFAULT_VAR_FRACTION * (hi - lo)

    def mobility(self) -> MobilityParams:
        try:
            return MobilityParams.from_speed_stats(
                self.mean_speed_mps, self.resolved_var_speed(), self.v_max()
            )
        except ValueError as exc:
            raise ConfigError(f"mobility: {exc}") from exc

    def detection(self) -> DetectionSpec:
        return DetectionSpec(p_fa=self.p_fa, p_md=self.p_md)

    def dt_powers_w(self) -> list[float]:
        return [dbm_to_watt(p) for p in self.dt_powers_dbm]

    def build_model(self) -> BeamModel:
        return BeamModel(
            radio=self.radio(),
            mobility=self.mobility(),
            detection=self.detection(),
            dt_powers_w=self.dt_powers_w(),
            dt_durations=list(self.dt_durations_slots),
        )

    def solver_params(self) -> SolverParams:
        return SolverParams(
            lambda0=self.lambda0,
            alpha0=self.alpha0,
            cost_budget=self.cost_budget,
            eps_v=self.eps_v,
            eps_c=self.eps_c,
            max_stages=self.max_stages,
            lambda_grid=list(self.lambda_grid),
            rng_seed=self.solver_seed,
        )

    def belief_set(self, model: BeamModel) -> list[np.ndarray]:
        width = self.belief_width or self.num_sublinks
        structured = structured_belief_set(self.num_sublinks, width)
        if self.belief_strategy == "structured":
            return structured
        count = self.belief_count or len(structured)
        return random_belief_set(
            model.tables, self.num_sublinks, count, self.belief_seed, int(Obs.EXIT)
        )

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "radio": {
                "theta_deg": self.theta_deg,
                "d0_m": self.d0_m,
                "num_sublinks": self.num_sublinks,
                "w_tot_hz": self.w_tot_hz,
                "fc_hz": self.fc_hz,
                "xi": self.xi,
                "n0_dbm_hz": self.n0_dbm_hz,
                "delta_t_s": self.delta_t_s,
            },
            "mobility": {
                "mean_speed_mps": self.mean_speed_mps,
                "var_speed_mps2": self.var_speed_mps2,
            },
            "detection": {"p_fa": self.p_fa, "p_md": self.p_md},
            "actions": {
                "dt_powers_dbm": list(self.dt_powers_dbm),
                "dt_durations_slots": list(self.dt_durations_slots),
                "t_bt_slots": self.t_bt_slots,
            },
            "solver": {
                "lambda0": self.lambda0,
                "alpha0": self.alpha0,
                "cost_budget": self.cost_budget,
                "eps_v": self.eps_v,
                "eps_c": self.eps_c,
                "max_stages": self.max_stages,
                "lambda_grid": [float(x) for x in self.lambda_grid],
                "seed": self.solver_seed,
            },
            "sim": {
                "episodes": self.episodes,
                "seed": self.sim_seed,
                "epsilons": list(self.sim_epsilons),
            },
            "belief": {
                "strategy": self.belief_strategy,
                "width": self.belief_width,
                "count": self.belief_count,
                "seed": self.belief_seed,
            },
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if raw is None:
            raw = {}
        _require(isinstance(raw, dict), "config", "top level must be a mapping")
        known = {"radio", "mobility", "detection", "actions", "solver", "sim", "belief"}
        for key in raw:
            _require(key in known, f"config.{key}", "unknown section")
        d = cls()  # defaults
        radio = raw.get("radio", {}) or {}
        mob = raw.get("mobility", {}) or {}
        det = raw.get("detection", {}) or {}
        act = raw.get("actions", {}) or {}
        sol = raw.get("solver", {}) or {}
        sim = raw.get("sim", {}) or {}
        bel = raw.get("belief", {}) or {}

        epsilon = _num(det, "epsilon", "detection", None)
        p_fa = _num(det, "p_fa", "detection", None)
        p_md = _num(det, "p_md", "detection", None)
        if epsilon is not None:
            _require(p_fa is None and p_md is None, "detection",
                     "give either epsilon or (p_fa, p_md), not both")
            _require(0.0 < epsilon < 1.0, "detection.epsilon",
                     "must be strictly inside (0, 1)")
            p_fa = p_md = epsilon
        if p_fa is None:
            p_fa = d.p_fa
        if p_md is None:
            p_md = d.p_md

        powers = _get(act, "dt_powers_dbm", "actions", list(d.dt_powers_dbm))
        durations = _get(act, "dt_durations_slots", "actions",
                         list(d.dt_durations_slots))
        _require(isinstance(powers, list), "actions.dt_powers_dbm", "expected a list")
        _require(isinstance(durations, list), "actions.dt_durations_slots",
                 "expected a list")
        grid = _get(sol, "lambda_grid", "solver", list(d.lambda_grid))
        _require(isinstance(grid, list), "solver.lambda_grid", "expected a list")
        sim_eps = _get(sim, "epsilons", "sim", list(d.sim_epsilons))
        _require(isinstance(sim_eps, list), "sim.epsilons", "expected a list")

        return cls(
            theta_deg=_num(radio, "theta_deg", "radio", d.theta_deg),
            d0_m=_num(radio, "d0_m", "radio", d.d0_m),
            num_sublinks=_int(radio, "num_sublinks", "radio", d.num_sublinks),
            w_tot_hz=_num(radio, "w_tot_hz", "radio", d.w_tot_hz),
            fc_hz=_num(radio, "fc_hz", "radio", d.fc_hz),
            xi=_num(radio, "xi", "radio", d.xi),
            n0_dbm_hz=_num(radio, "n0_dbm_hz", "radio", d.n0_dbm_hz),
            delta_t_s=_num(radio, "delta_t_s", "radio", d.delta_t_s),
            mean_speed_mps=_num(mob, "mean_speed_mps", "mobility", d.mean_speed_mps),
            var_speed_mps2=_num(mob, "var_speed_mps2", "mobility", d.var_speed_mps2),
            p_fa=p_fa,
            p_md=p_md,
            dt_powers_dbm=tuple(float(x) for x in powers),
            dt_durations_slots=tuple(int(x) for x in durations),
            t_bt_slots=_int(act, "t_bt_slots", "actions", d.t_bt_slots),
            lambda0=_num(sol, "lambda0", "solver", d.lambda0),
            alpha0=_num(sol, "alpha0", "solver", d.alpha0),
            cost_budget=_num(sol, "cost_budget", "solver", d.cost_budget),
            eps_v=_num(sol, "eps_v", "solver", d.eps_v),
            eps_c=_num(sol, "eps_c", "solver", d.eps_c),
            max_stages=_int(sol, "max_stages", "solver", d.max_stages),
            lambda_grid=tuple(float(x) for x in grid),
            solver_seed=_int(sol, "seed", "solver", d.solver_seed),
            episodes=_int(sim, "episodes", "sim", d.episodes),
            sim_seed=_int(sim, "seed", "sim", d.sim_seed),
            sim_epsilons=tuple(float(x) for x in sim_eps),
            belief_strategy=_get(bel, "strategy", "belief", d.belief_strategy),
            belief_width=bel.get("width", d.belief_width),
            belief_count=bel.get("count", d.belief_count),
            belief_seed=_int(bel, "seed", "belief", d.belief_seed),
        )

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config: invalid YAML ({exc})") from exc
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_yaml(fh.read())
