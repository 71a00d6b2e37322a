"""Hot episode-simulation kernels with a numba and a pure-numpy backend.

The same source functions serve both backends: when numba is available (and
not disabled) they are compiled with @njit, otherwise the plain Python
definitions run as-is. Selection is driven by the BEAMPLAN_BACKEND
environment variable: "auto" (default), "numba", or "numpy".

All kernels draw from the backend's global legacy MT19937 stream; callers
seed it per episode through seed_stream(). Numba's implementation of the
top-level numpy.random functions reproduces the NumPy legacy sequence, so
both backends generate identical episodes from the same seed.
"""

from __future__ import annotations

import os

import numpy as np

_requested = os.environ.get("BEAMPLAN_BACKEND", "auto").lower()
if _requested not in ("auto", "numba", "numpy"):
    raise RuntimeError(f"BEAMPLAN_BACKEND must be auto|numba|numpy, got {_requested!r}")

if _requested == "numpy":
    _njit = None
else:
    try:
        from numba import njit as _njit
    except ImportError:
        if _requested == "numba":
            raise
        _njit = None

BACKEND = "numpy" if _njit is None else "numba"

# Episode status codes returned by the kernels.
STATUS_OK = 0
STATUS_IMPOSSIBLE_OBS = 1
STATUS_SLOT_LIMIT = 2


def _seed_stream(seed):
    np.random.seed(seed)


def _draw_uniform():
    return np.random.random()


def _walk_segment(state, n_steps, p, q, s_exit, lo, hi):
    """Advance the sub-link random walk by n_steps micro-slots.

    Returns (end_state, stayed, absorbed_offset): stayed is 1 iff the whole
    path X_0..X_n remained inside [lo, hi]; absorbed_offset is the 1-based
    slot (within this segment) at which the walk hit the exit state, or -1.
    The boundary at sub-link 0 reflects (a backward step becomes a stay).
    """
    stayed = 1 if lo <= state <= hi else 0
    absorbed = -1
    for t in range(n_steps):
        u = np.random.random()
        if u < p:
            state += 1
        elif state > 0 and u < p + q:
            state -= 1
        if state == s_exit:
            absorbed = t + 1
            stayed = 0
            break
        if state < lo or state > hi:
            stayed = 0
    return state, stayed, absorbed


def _solved_episode(
    alpha_values,
    alpha_actions,
    lagrangian,
    weights,
    act_lo,
    act_hi,
    act_dur,
    act_cost,
    act_bits,
    act_is_bt,
    p,
    q,
    p_d,
    p_fa,
    n_sub,
    seed,
    max_slots,
):
    """Run one full episode of a solved (alpha-vector) policy.

    Maintains the exact Bayes belief, picks the greedy alpha-vector action at
    every decision epoch, advances the hidden walk slot-by-slot, samples the
    observation from the kernel conditioned on the realized path, and credits
    bits only when the path stayed inside the beam support (the all-or-
    nothing DT success event).

    Returns (bits, energy, duration_slots, n_bt, n_dt, status).
    """
    np.random.seed(seed)
    s_exit = n_sub
    b = np.zeros(n_sub + 1)
    b[0] = 1.0
    state = 0
    bits = 0.0
    energy = 0.0
    t = 0
    n_bt = 0
    n_dt = 0
    duration = -1
    status = STATUS_OK

    while True:
        i = np.argmax(alpha_values @ b)
        a = alpha_actions[i]
        if a < 0:
            a = np.argmax(lagrangian @ b)
        lo = act_lo[a]
        hi = act_hi[a]
        n_steps = act_dur[a]
        s0 = state

        # Inline walk over the action's duration.
        stayed = 1 if lo <= state <= hi else 0
        for step in range(n_steps):
            u = np.random.random()
            if u < p:
                state += 1
            elif state > 0 and u < p + q:
                state -= 1
            if state == s_exit:
                duration = t + step + 1
                stayed = 0
                break
            if state < lo or state > hi:
                stayed = 0
        t += n_steps

        energy += act_cost[a]
        if act_is_bt[a]:
            n_bt += 1
        else:
            n_dt += 1
            if stayed == 1:
                bits += act_bits[a]

        if state == s_exit:
            break
        if act_is_bt[a]:
            pair_in = lo <= s0 <= hi and lo <= state <= hi
            p_ack = p_d if pair_in else p_fa
            o = 0 if np.random.random() < p_ack else 1
        else:
            o = 0 if stayed == 1 else 1

        bu = b @ weights[a, o]
        norm = bu.sum()
        if norm <= 0.0:
            status = STATUS_IMPOSSIBLE_OBS
            break
        b = bu / norm
        if t > max_slots:
            status = STATUS_SLOT_LIMIT
            break

    return bits, energy, duration, n_bt, n_dt, status


if _njit is not None:
    seed_stream = _njit(cache=True)(_seed_stream)
    draw_uniform = _njit(cache=True)(_draw_uniform)
    walk_segment = _njit(cache=True)(_walk_segment)
    solved_episode = _njit(cache=True)(_solved_episode)
else:
    seed_stream = _seed_stream
    draw_uniform = _draw_uniform
    walk_segment = _walk_segment
    solved_episode = _solved_episode
