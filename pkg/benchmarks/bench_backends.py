"""Benchmark the episode kernels: numba backend vs pure-numpy fallback.

Runs the same seeded Monte Carlo workload under both backends (selected via
the BEAMPLAN_BACKEND environment variable in a subprocess) and reports
wall-clock time and episode throughput. Invoke from the repository root:

    python3 benchmarks/bench_backends.py [--episodes N]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = """
import json
import sys
import time

from beamplan import kernels
from beamplan.config import ExperimentConfig
from beamplan.simulate import (
    GeniePolicy,
    HeuristicPolicy,
    SolvedPolicy,
    monte_carlo_metrics,
)
from beamplan.solver import ValueFunction

episodes = int(sys.argv[1])
cfg = ExperimentConfig()
model = cfg.build_model()
cost_part, a_idx = model.blind_bt_policy()
policies = {
    "heuristic_10dbm_t1000": HeuristicPolicy(0.01, 1000),
    "genie_10dbm_t1000": GeniePolicy(0.01, 1000),
    "solved_blind_bt": SolvedPolicy(ValueFunction.blind(cost_part, a_idx, 1e6)),
}

# Warm-up to exclude JIT compilation from the timings.
for policy in policies.values():
    monte_carlo_metrics(policy, model, 2, seed=0, bootstrap=10)

out = {"backend": kernels.BACKEND, "episodes": episodes, "timings": {}}
for name, policy in policies.items():
    t0 = time.perf_counter()
    m = monte_carlo_metrics(policy, model, episodes, seed=12345, bootstrap=10)
    dt = time.perf_counter() - t0
    out["timings"][name] = {
        "seconds": dt,
        "episodes_per_second": episodes / dt,
        "avg_rate_bps": m.avg_rate_bps,
        "avg_power_dbm": m.avg_power_dbm,
    }
print(json.dumps(out))
"""


def run_backend(backend: str, episodes: int) -> dict:
    env = dict(os.environ, BEAMPLAN_BACKEND=backend)
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, str(episodes)],
        capture_output=True,
        text=True,
        env=env,
    )
    if proc.returncode != 0:
        raise RuntimeError(f"{backend} worker failed:\n{proc.stderr}")
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--episodes", type=int, default=50)
    args = parser.parse_args()

    results = {b: run_backend(b, args.episodes) for b in ("numba", "numpy")}

    print(f"episodes per policy: {args.episodes}\n")
    header = f"{'policy':<28}{'numba s':>10}{'numpy s':>10}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name in results["numba"]["timings"]:
        t_nb = results["numba"]["timings"][name]["seconds"]
        t_np = results["numpy"]["timings"][name]["seconds"]
        print(f"{name:<28}{t_nb:>10.2f}{t_np:>10.2f}{t_np / t_nb:>8.1f}x")

    # The two backends must agree exactly on the simulated statistics.
    for name in results["numba"]["timings"]:
        a = results["numba"]["timings"][name]
        b = results["numpy"]["timings"][name]
        agree = (
            a["avg_rate_bps"] == b["avg_rate_bps"]
            and a["avg_power_dbm"] == b["avg_power_dbm"]
        )
        if not agree:
            raise SystemExit(f"backend mismatch on {name}: {a} vs {b}")
    print("\nbackend outputs identical: yes")


if __name__ == "__main__":
    main()
