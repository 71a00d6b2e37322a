"""Experiment driver CLI.

Subcommands: solve | sweep | online | simulate | compare | beliefs.
Every command is a deterministic function of (config, flags, seed):
re-running writes byte-identical artifacts. Output files never embed
timestamps; the run directory name comes from --name (default derived from
the seed).

Exit codes: 0 ok, 1 validation error, 2 non-convergence, 3 internal
consistency error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys

import numpy as np

from .beliefs import ImpossibleObservationError, initial_belief
from .config import ConfigError, ExperimentConfig
from .mobility import ConsistencyError
from .simulate import (
    GeniePolicy,
    HeuristicPolicy,
    MetricsResult,
    SolvedPolicy,
    monte_carlo_metrics,
)
from .solver import (
    PbviRun,
    SolverParams,
    ValueFunction,
    pbvi_online,
    pbvi_run,
    pbvi_sweep,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NON_CONVERGENCE = 2
EXIT_CONSISTENCY = 3

CSV_HEADER = (
    "policy_id,lambda,epsilon,avg_rate_bps,avg_power_dbm,avg_duration_slots,"
    "ci_rate,ci_power,episodes,seed"
)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def _csv_row(policy_id: str, lam, epsilon, m: MetricsResult) -> str:
    fields = [
        policy_id,
        _fmt(lam),
        _fmt(epsilon),
        _fmt(m.avg_rate_bps),
        _fmt(m.avg_power_dbm),
        _fmt(m.avg_duration_slots),
        _fmt(m.ci_rate_bps),
        _fmt(m.ci_power_dbm),
        str(m.episodes),
        str(m.seed),
    ]
    return ",".join(fields)


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _out_dir(args, command: str) -> str:
    name = args.name or f"seed{args.seed if args.seed is not None else 'default'}"
    path = os.path.join(args.out, command, name)
    os.makedirs(path, exist_ok=True)
    return path


def _vf_payload(run: PbviRun, actions) -> dict:
    vf = run.vf
    return {
        "lambda": run.lam,
        "converged": run.converged,
        "stages": run.stages,
        "value_b0": run.value_b0,
        "reward_value_b0": run.reward_value_b0,
        "cost_value_b0": run.cost_value_b0,
        "stage_log": run.stage_log,
        "alphas": [
            {
                "action": _action_tag(actions, int(vf.actions[i])),
                "values": vf.values[i].tolist(),
                "reward_part": vf.reward_parts[i].tolist(),
                "cost_part": vf.cost_parts[i].tolist(),
            }
            for i in range(len(vf))
        ],
    }


def _action_tag(actions, idx: int):
    if idx < 0:
        return None
    a = actions[idx]
    return {
        "kind": a.kind,
        "lo": a.lo,
        "hi": a.hi,
        "power_w": a.power_w,
        "duration": a.duration,
    }


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    else:
        cfg = ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["sim_seed"] = args.seed
    if getattr(args, "episodes", None) is not None:
        overrides["episodes"] = args.episodes
    if overrides:
        from dataclasses import replace

        cfg = replace(cfg, **overrides)
    return cfg


def _blind_init(model):
    """Per-lambda lower-bound seed from the model's cheapest blind policy."""
    cost_part, a_idx = model.blind_bt_policy()

    def factory(lam: float) -> ValueFunction:
        return ValueFunction.blind(cost_part, a_idx, lam)

    return factory


def _solve_one(packed):
    belief_set, tables, b0, params, lam, idx, blind_cost, blind_action = packed
    rng = np.random.RandomState(
        np.random.SeedSequence([params.rng_seed, idx]).generate_state(1)[0]
    )
    init = ValueFunction.blind(blind_cost, blind_action, lam)
    return pbvi_run(belief_set, tables, b0, lam, params, rng, init=init)


def _solve_grid(belief_set, model, b0, params: SolverParams, threads: int):
    """Solve every grid point, optionally across worker processes."""
    tables = model.tables
    blind_cost, blind_action = model.blind_bt_policy()
    jobs = [
        (belief_set, tables, b0, params, lam, idx, blind_cost, blind_action)
        for idx, lam in enumerate(params.lambda_grid)
    ]
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_solve_one, jobs))
    return [_solve_one(job) for job in jobs]


def cmd_solve(args) -> int:
    cfg = _load_config(args)
    model = cfg.build_model()
    params = cfg.solver_params()
    lam = args.lam if args.lam is not None else (
        params.lambda_grid[0] if params.lambda_grid else params.lambda0
    )
    belief_set = cfg.belief_set(model)
    b0 = initial_belief(cfg.num_sublinks)
    rng = np.random.RandomState(params.rng_seed)
    run = pbvi_run(
        belief_set, model.tables, b0, lam, params, rng,
        init=_blind_init(model)(lam),
    )

    out = _out_dir(args, "solve")
    _write(os.path.join(out, "config.yaml"), cfg.to_yaml())
    _write(
        os.path.join(out, "value_function.json"),
        _json_dumps(_vf_payload(run, model.actions)),
    )
    print(f"solve: lambda={lam:g} stages={run.stages} converged={run.converged}")
    return EXIT_OK if run.converged else EXIT_NON_CONVERGENCE


def _epsilon_envs(cfg: ExperimentConfig, model):
    """(epsilon, environment model) pairs the sweep evaluates policies under.

    The entry matching the config's own symmetric detection point reuses the
    already built model; other entries are mismatched environments with the
    same geometry and actions but different detection error rates.
    """
    from dataclasses import replace

    envs = []
    for eps in cfg.sim_epsilons:
        if eps == cfg.p_fa == cfg.p_md:
            envs.append((eps, model))
        else:
            envs.append((eps, replace(cfg, p_fa=eps, p_md=eps).build_model()))
    return envs


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    model = cfg.build_model()
    params = cfg.solver_params()
    belief_set = cfg.belief_set(model)
    b0 = initial_belief(cfg.num_sublinks)
    runs = _solve_grid(belief_set, model, b0, params, args.threads)
    envs = _epsilon_envs(cfg, model)

    rows = [CSV_HEADER]
    diag = []
    for run in runs:
        for eps, env in envs:
            metrics = monte_carlo_metrics(
                SolvedPolicy(run.vf), model, cfg.episodes, cfg.sim_seed,
                env_model=env,
            )
            rows.append(_csv_row("solved", run.lam, eps, metrics))
        diag.append(
            {
                "lambda": run.lam,
                "converged": run.converged,
                "stages": run.stages,
                "value_b0": run.value_b0,
                "reward_value_b0": run.reward_value_b0,
                "cost_value_b0": run.cost_value_b0,
            }
        )

    out = _out_dir(args, "sweep")
    _write(os.path.join(out, "config.yaml"), cfg.to_yaml())
    _write(os.path.join(out, "frontier.csv"), "\n".join(rows) + "\n")
    _write(os.path.join(out, "sweep.json"), _json_dumps(diag))
    all_ok = all(r.converged for r in runs)
    print(f"sweep: {len(runs)} lambda points, all_converged={all_ok}")
    return EXIT_OK if all_ok else EXIT_NON_CONVERGENCE


def cmd_online(args) -> int:
    cfg = _load_config(args)
    if cfg.cost_budget is None:
        print("online: solver.cost_budget must be set", file=sys.stderr)
        return EXIT_VALIDATION
    model = cfg.build_model()
    params = cfg.solver_params()
    belief_set = cfg.belief_set(model)
    b0 = initial_belief(cfg.num_sublinks)
    result = pbvi_online(
        belief_set, model.tables, b0, params, init_factory=_blind_init(model)
    )

    rows = ["stage,lambda,reward_value_b0,cost_value_b0,value_b0"]
    for rec in result.trajectory:
        rows.append(
            ",".join(
                [
                    str(rec["stage"]),
                    _fmt(rec["lam"]),
                    _fmt(rec["reward_b0"]),
                    _fmt(rec["cost_b0"]),
                    _fmt(rec["value_b0"]),
                ]
            )
        )
    payload = {
        "lambda_opt": result.lam_opt,
        "converged": result.converged,
        "value_b0": result.value_b0,
        "reward_value_b0": result.reward_value_b0,
        "cost_value_b0": result.cost_value_b0,
        "alphas": [
            {
                "action": _action_tag(model.actions, int(result.vf.actions[i])),
                "values": result.vf.values[i].tolist(),
                "reward_part": result.vf.reward_parts[i].tolist(),
                "cost_part": result.vf.cost_parts[i].tolist(),
            }
            for i in range(len(result.vf))
        ],
    }

    out = _out_dir(args, "online")
    _write(os.path.join(out, "config.yaml"), cfg.to_yaml())
    _write(os.path.join(out, "trajectory.csv"), "\n".join(rows) + "\n")
    _write(os.path.join(out, "policy.json"), _json_dumps(payload))
    print(
        f"online: lambda_opt={result.lam_opt:g} converged={result.converged} "
        f"stages={len(result.trajectory)}"
    )
    return EXIT_OK if result.converged else EXIT_NON_CONVERGENCE


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    model = cfg.build_model()
    params = cfg.solver_params()
    lam = args.lam if args.lam is not None else params.lambda_grid[0]
    belief_set = cfg.belief_set(model)
    b0 = initial_belief(cfg.num_sublinks)
    rng = np.random.RandomState(params.rng_seed)
    run = pbvi_run(
        belief_set, model.tables, b0, lam, params, rng,
        init=_blind_init(model)(lam),
    )
    metrics = monte_carlo_metrics(
        SolvedPolicy(run.vf), model, cfg.episodes, cfg.sim_seed
    )

    out = _out_dir(args, "simulate")
    _write(os.path.join(out, "config.yaml"), cfg.to_yaml())
    _write(
        os.path.join(out, "metrics.csv"),
        CSV_HEADER + "\n" + _csv_row("solved", lam, cfg.p_fa, metrics) + "\n",
    )
    print(
        f"simulate: lambda={lam:g} rate={metrics.avg_rate_bps:.4g} bit/s "
        f"power={metrics.avg_power_dbm:.3f} dBm"
    )
    return EXIT_OK if run.converged else EXIT_NON_CONVERGENCE


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    model = cfg.build_model()
    params = cfg.solver_params()
    b0 = initial_belief(cfg.num_sublinks)

    from dataclasses import replace as dc_replace

    cfg_structured = dc_replace(cfg, belief_strategy="structured")
    structured = cfg_structured.belief_set(model)
    cfg_random = dc_replace(cfg, belief_strategy="random",
                            belief_count=len(structured))
    random_set = cfg_random.belief_set(model)

    rows = [CSV_HEADER]
    runs_s = _solve_grid(structured, model, b0, params, args.threads)
    runs_r = _solve_grid(random_set, model, b0, params, args.threads)
    all_ok = True
    for run in runs_s:
        m = monte_carlo_metrics(SolvedPolicy(run.vf), model, cfg.episodes, cfg.sim_seed)
        rows.append(_csv_row("solved_structured", run.lam, cfg.p_fa, m))
        all_ok &= run.converged
    for run in runs_r:
        m = monte_carlo_metrics(SolvedPolicy(run.vf), model, cfg.episodes, cfg.sim_seed)
        rows.append(_csv_row("solved_random", run.lam, cfg.p_fa, m))
        all_ok &= run.converged
    for p_dbm, p_w in zip(cfg.dt_powers_dbm, cfg.dt_powers_w()):
        for t_dt in cfg.dt_durations_slots:
            m = monte_carlo_metrics(
                HeuristicPolicy(p_w, t_dt), model, cfg.episodes, cfg.sim_seed
            )
            rows.append(_csv_row(f"heuristic_p{p_dbm:g}dbm_t{t_dt}", None, cfg.p_fa, m))
            m = monte_carlo_metrics(
                GeniePolicy(p_w, t_dt), model, cfg.episodes, cfg.sim_seed
            )
            rows.append(_csv_row(f"genie_p{p_dbm:g}dbm_t{t_dt}", None, cfg.p_fa, m))

    out = _out_dir(args, "compare")
    _write(os.path.join(out, "config.yaml"), cfg.to_yaml())
    _write(os.path.join(out, "comparison.csv"), "\n".join(rows) + "\n")
    print(f"compare: {len(rows) - 1} policy rows")
    return EXIT_OK if all_ok else EXIT_NON_CONVERGENCE


def cmd_beliefs(args) -> int:
    cfg = _load_config(args)
    model = cfg.build_model()
    belief_set = cfg.belief_set(model)
    out = _out_dir(args, "beliefs")
    _write(os.path.join(out, "config.yaml"), cfg.to_yaml())
    _write(
        os.path.join(out, "beliefs.json"),
        _json_dumps(
            {
                "strategy": cfg.belief_strategy,
                "count": len(belief_set),
                "beliefs": [b.tolist() for b in belief_set],
            }
        ),
    )
    print(f"beliefs: wrote {len(belief_set)} beliefs ({cfg.belief_strategy})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamplan",
        description="Constrained-POMDP planner for mm-wave beam training vs. data transmission",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "solve": cmd_solve,
        "sweep": cmd_sweep,
        "online": cmd_online,
        "simulate": cmd_simulate,
        "compare": cmd_compare,
        "beliefs": cmd_beliefs,
    }
    for name, fn in commands.items():
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", type=str, default="results")
        p.add_argument("--name", type=str, default=None)
        p.add_argument("--episodes", type=int, default=None)
        if name in ("solve", "simulate"):
            p.add_argument("--lambda", dest="lam", type=float, default=None)
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConsistencyError, ImpossibleObservationError) as exc:
        print(f"internal consistency error: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY


if __name__ == "__main__":
    sys.exit(main())
