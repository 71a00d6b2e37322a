"""Random-walk mobility: step probabilities, transition matrices, stay events.

States are 0-indexed internally: sub-links 0..S-1 plus the absorbing exit
state at index S. Public helpers that take sub-link indices accept 1-based
indices to match the physical numbering of the road.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

ROW_SUM_WARN = 1e-12
ROW_SUM_FAIL = 1e-9


class FeasibilityError(ValueError):
    """Speed statistics outside the feasible (E[v], Var[v]) region."""


class ConsistencyError(RuntimeError):
    """Internal numeric drift beyond the acceptable tolerance."""


def check_feasible(mean_speed: float, var_speed: float, v_max: float) -> list[str]:
    """Return the list of violated feasibility constraints (empty if feasible).

    The three strict inequalities keep 0 < q < p < 1 and 1 - p - q > 0:
      p < 1:      Var[v] < -E[v]^2 - v_max*E[v] + 2*v_max^2
      q > 0:      Var[v] > -E[v]^2 + v_max*E[v]
      1-p-q > 0:  Var[v] + E[v]^2 < v_max^2
    """
    if v_max <= 0.0:
        raise ValueError(f"v_max must be positive, got {v_max}")
    ev, var = mean_speed, var_speed
    failures = []
    if not var < -(ev**2) - v_max * ev + 2.0 * v_max**2:
        failures.append(
            "p < 1 requires Var[v] < -E[v]^2 - v_max*E[v] + 2*v_max^2 "
            f"({var} >= {-(ev ** 2) - v_max * ev + 2.0 * v_max ** 2})"
        )
    if not var > -(ev**2) + v_max * ev:
        failures.append(
            "q > 0 requires Var[v] > -E[v]^2 + v_max*E[v] "
            f"({var} <= {-(ev ** 2) + v_max * ev})"
        )
    if not var + ev**2 < v_max**2:
        failures.append(
            "1-p-q > 0 requires Var[v] + E[v]^2 < v_max^2 "
            f"({var + ev ** 2} >= {v_max ** 2})"
        )
    return failures


def feasible_var_interval(mean_speed: float, v_max: float) -> tuple[float, float]:
    """Open interval of feasible Var[v] values for a given E[v] and v_max."""
    lo = -(mean_speed**2) + v_max * mean_speed
    hi = min(
        -(mean_speed**2) - v_max * mean_speed + 2.0 * v_max**2,
        v_max**2 - mean_speed**2,
    )
    if not lo < hi:
        raise FeasibilityError(
            f"no feasible Var[v] for E[v]={mean_speed}, v_max={v_max}"
        )
    return lo, hi


def derive_step_probs(mean_speed: float, var_speed: float, v_max: float) -> tuple[float, float]:
    """Map (E[v], Var[v], v_max) to forward/backward step probabilities (p, q).

    p = (Var[v] + E[v]^2) / (2 v_max^2) + E[v] / (2 v_max)
    q = (Var[v] + E[v]^2) / (2 v_max^2) - E[v] / (2 v_max)
    """
    failures = check_feasible(mean_speed, var_speed, v_max)
    if failures:
        raise FeasibilityError("; ".join(failures))
    base = (var_speed + mean_speed**2) / (2.0 * v_max**2)
    drift = mean_speed / (2.0 * v_max)
    return base + drift, base - drift


@dataclass(frozen=True)
class MobilityParams:
    """Speed statistics with their derived random-walk step probabilities."""

    mean_speed: float
    var_speed: float
    v_max: float
    p: float
    q: float

    def __post_init__(self) -> None:
        if not (0.0 < self.q < self.p < 1.0 and 1.0 - self.p - self.q > 0.0):
            raise ValueError(
                f"need 0 < q < p < 1 and 1-p-q > 0, got p={self.p}, q={self.q}"
            )
        p_chk, q_chk = derive_step_probs(self.mean_speed, self.var_speed, self.v_max)
        if abs(p_chk - self.p) > 1e-12 or abs(q_chk - self.q) > 1e-12:
            raise ValueError("(p, q) inconsistent with the speed statistics")

    @classmethod
    def from_speed_stats(cls, mean_speed: float, var_speed: float, v_max: float) -> "MobilityParams":
        p, q = derive_step_probs(mean_speed, var_speed, v_max)
        return cls(mean_speed=mean_speed, var_speed=var_speed, v_max=v_max, p=p, q=q)


def one_step_matrix(p: float, q: float, num_sublinks: int) -> np.ndarray:
    """(S+1)x(S+1) one-step transition matrix over sub-links plus exit.

    Reflecting boundary at sub-link 1 (backward step becomes a stay) and
    absorption from sub-link S into the exit state with probability p.
    """
    s1 = num_sublinks + 1
    m = np.zeros((s1, s1))
    for s in range(num_sublinks):
        m[s, s + 1] = p
        if s == 0:
            m[s, s] = 1.0 - p
        else:
            m[s, s - 1] = q
            m[s, s] = 1.0 - p - q
    m[num_sublinks, num_sublinks] = 1.0
    return m


def _check_rows(m: np.ndarray) -> np.ndarray:
    sums = m.sum(axis=1)
    drift = np.abs(sums - 1.0).max()
    if drift > ROW_SUM_FAIL:
        raise ConsistencyError(f"row-sum drift {drift} exceeds {ROW_SUM_FAIL}")
    if drift > ROW_SUM_WARN:
        m = m / sums[:, None]
    return m


def n_step_matrix(m: np.ndarray, n: int) -> np.ndarray:
    """N-step transition matrix via exponentiation by squaring."""
    if n < 1:
        raise ValueError(f"step count must be >= 1, got {n}")
    return _check_rows(np.linalg.matrix_power(m, n))


def restricted_matrix(m: np.ndarray, support: tuple[int, int]) -> np.ndarray:
    """Copy of m zeroed outside the beam support (1-based inclusive interval).

    Rows become sub-stochastic: mass leaving the support is dropped.
    """
    lo, hi = support
    num_sublinks = m.shape[0] - 1
    if not 1 <= lo <= hi <= num_sublinks:
        raise ValueError(f"support {support} not a valid interval in 1..{num_sublinks}")
    keep = np.zeros(m.shape[0], dtype=bool)
    keep[lo - 1 : hi] = True
    return np.where(np.outer(keep, keep), m, 0.0)


def stay_probability(
    m: np.ndarray, s: int, s_next: int, support: tuple[int, int], n: int
) -> float:
    """Probability the walk stays inside the support for n steps, given endpoints.

    s and s_next are 1-based states (S+1 denotes the exit state). Defined as
    restricted^n / full^n at the endpoint pair; 0 when the unconditioned
    endpoint probability is itself 0 (the conditioning event has no mass).
    """
    full = n_step_matrix(m, n)
    rest = np.linalg.matrix_power(restricted_matrix(m, support), n)
    denom = full[s - 1, s_next - 1]
    if denom == 0.0:
        return 0.0
    return float(rest[s - 1, s_next - 1] / denom)


def expected_absorption_times(m: np.ndarray) -> np.ndarray:
    """Expected micro-slots to absorption from each sub-link (fundamental matrix)."""
    num_sublinks = m.shape[0] - 1
    q_block = m[:num_sublinks, :num_sublinks]
    return np.linalg.solve(np.eye(num_sublinks) - q_block, np.ones(num_sublinks))


def expected_episode_duration(m: np.ndarray) -> float:
    """Expected micro-slots to absorption from sub-link 1."""
    return float(expected_absorption_times(m)[0])


class MatrixPowerCache:
    """Caches full and support-restricted matrix powers of one base matrix.

    Keys are (support, n) with support=None for the unrestricted matrix.
    Reads are lock-free on the GIL-protected dict; inserts are lock-guarded.
    """

    def __init__(self, m: np.ndarray) -> None:
        self._m = m
        self._cache: dict[tuple[tuple[int, int] | None, int], np.ndarray] = {}
        self._lock = threading.Lock()

    def power(self, n: int, support: tuple[int, int] | None = None) -> np.ndarray:
        key = (support, n)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if support is None:
            val = n_step_matrix(self._m, n)
        else:
            val = np.linalg.matrix_power(restricted_matrix(self._m, support), n)
        with self._lock:
            self._cache.setdefault(key, val)
        return self._cache[key]
