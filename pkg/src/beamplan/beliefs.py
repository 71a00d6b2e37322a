"""Belief representation, exact Bayes filtering, and belief-set construction."""

from __future__ import annotations

import numpy as np

from .model import PomdpTables

_SIMPLEX_TOL = 1e-10


class ImpossibleObservationError(RuntimeError):
    """The observed symbol has zero probability under the current belief.

    Raised instead of silently renormalizing a zero vector: inside a
    consistent simulation this indicates a model bug.
    """


def validate_belief(b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.min() < 0.0 or abs(b.sum() - 1.0) > _SIMPLEX_TOL:
        raise ValueError(f"not a probability vector: sum={b.sum()}, min={b.min()}")
    return b


def initial_belief(num_sublinks: int) -> np.ndarray:
    """Point mass on sub-link 1: the BS knows when the MU enters the road."""
    if num_sublinks < 1:
        raise ValueError(f"num_sublinks must be >= 1, got {num_sublinks}")
    b = np.zeros(num_sublinks + 1)
    b[0] = 1.0
    return b


def update(b: np.ndarray, a_idx: int, o: int, tables: PomdpTables) -> np.ndarray:
    """Bayes posterior b'(s') from belief b, action index a_idx, observation o.

    b'(s') = sum_s P(o|s,a,s') P(s'|s,a) b(s) / P(o|a,b)
    """
    unnorm = b @ tables.weights[a_idx, o]
    norm = unnorm.sum()
    if norm <= 0.0:
        raise ImpossibleObservationError(
            f"observation {o} has zero probability under action {a_idx}"
        )
    return unnorm / norm


def structured_belief_set(num_sublinks: int, width: int) -> list[np.ndarray]:
    """Uniform beliefs over all windows of up to `width` consecutive sub-links.

    For w = 1..width and window starts i = 1..S+1-w, the belief is uniform
    (1/w) over sub-links i..i+w-1 with zero mass on the exit state. Count is
    sum_{w=1}^{width} (S+1-w); deterministic order (w ascending, i ascending).
    """
    if not 1 <= width <= num_sublinks:
        raise ValueError(f"width {width} out of range 1..{num_sublinks}")
    out = []
    for w in range(1, width + 1):
        for i in range(num_sublinks + 1 - w):
            b = np.zeros(num_sublinks + 1)
            b[i : i + w] = 1.0 / w
            out.append(b)
    return out


def random_belief_set(
    tables: PomdpTables,
    num_sublinks: int,
    count: int,
    seed: int,
    exit_obs: int,
    max_steps: int = 1_000_000,
) -> list[np.ndarray]:
    """Beliefs collected along random-action simulated trajectories.

    Starting from the entry belief, repeatedly pick a uniformly random
    action, sample a hidden state transition and an observation, and apply
    the Bayes update; the episode restarts whenever the exit observation is
    drawn. Beliefs closer than 1e-9 in L1 distance to an already collected
    one are discarded, so set cardinality is exact.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.RandomState(seed)
    collected: list[np.ndarray] = []

    def try_add(b: np.ndarray) -> None:
        for prev in collected:
            if np.abs(prev - b).sum() <= 1e-9:
                return
        collected.append(b.copy())

    b = initial_belief(num_sublinks)
    state = 0
    try_add(b)
    steps = 0
    while len(collected) < count:
        steps += 1
        if steps > max_steps:
            raise RuntimeError(
                f"collected only {len(collected)}/{count} distinct beliefs"
            )
        a = rng.randint(tables.n_actions)
        state_next = rng.choice(tables.n_states, p=tables.trans[a, state])
        o = rng.choice(tables.n_obs, p=tables.obs[a, :, state, state_next])
        if o == exit_obs:
            b = initial_belief(num_sublinks)
            state = 0
            continue
        b = update(b, a, o, tables)
        state = state_next
        try_add(b)
    return collected
