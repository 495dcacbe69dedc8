"""Compiled hot loops for training and evaluation.

These run the same slot recipe as the pure-Python environment and learner
steps, on the dense tables from CompiledModel, drawing from the same
splitmix64 stream in the same order, so a chunked run is bit-identical to
the step-by-step path. Chunking exists so the harness can take metric
snapshots between kernel calls.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    return z ^ (z >> _U64(31))


@njit(cache=True, inline="always")
def _uniform(state):
    state = state + _GOLDEN
    return state, float(_mix64(state) >> _U64(11)) * _INV53


@njit(cache=True, inline="always")
def _env_step(rng, cur, qk, row_total, counts, drop_digit, arr_cum):
    """Departures (per UPF, ascending) then the arrival draw; mutates cur."""
    # Callers may hand the state back as a boxed integer; keep it uint64 so
    # the counter arithmetic wraps instead of promoting.
    rng = _U64(rng)
    K = cur.shape[0]
    M = counts.shape[2]
    for k in range(K):
        rng, u1 = _uniform(rng)
        v = cur[k]
        tot = row_total[k, v]
        if u1 < qk[k] and tot > 0:
            rng, u2 = _uniform(rng)
            x = u2 * tot
            c = 0.0
            for m in range(M):
                c += counts[k, v, m]
                if x < c:
                    cur[k] = drop_digit[k, v, m]
                    break
    rng, ua = _uniform(rng)
    f = M
    for i in range(M + 1):
        if ua < arr_cum[i]:
            f = i
            break
    return rng, f


@njit(cache=True)
def pds_train_chunk(
    nslots,
    rng,
    pds_aidx,
    cur,
    vt,
    visits,
    policy,
    w,
    succ,
    add_digit,
    xi,
    qk,
    row_total,
    counts,
    drop_digit,
    pv,
    arr_cum,
    gamma,
    omega,
    offset,
    scale,
):
    A = xi.shape[0]
    K = cur.shape[0]
    rng = _U64(rng)
    cost_sum = 0.0
    blocked = 0
    for _ in range(nslots):
        rng, f = _env_step(rng, cur, qk, row_total, counts, drop_digit, arr_cum)
        aidx = 0
        for k in range(K):
            aidx += cur[k] * pv[k]
        sidx = f * A + aidx
        w[sidx] += 1
        xi_a = xi[aidx]
        cost_sum += xi_a
        best = np.inf
        besta = 0
        for a in range(K + 1):
            nxt = succ[aidx, f, a]
            if nxt >= 0:
                val = xi_a + gamma * vt[nxt]
                if val < best:
                    best = val
                    besta = a
        n = visits[pds_aidx]
        alpha = scale / (offset + n) ** omega
        vt[pds_aidx] += alpha * (best - vt[pds_aidx])
        visits[pds_aidx] = n + 1
        policy[sidx] = besta
        if f > 0 and besta == 0:
            blocked += 1
        pds_aidx = succ[aidx, f, besta]
        if besta > 0:
            cur[besta - 1] = add_digit[besta - 1, cur[besta - 1], f - 1]
    return rng, pds_aidx, cost_sum, blocked


@njit(cache=True)
def q_train_chunk(
    nslots,
    t_global,
    rng,
    prev_sidx,
    prev_a,
    cur,
    qtab,
    qvisits,
    policy,
    w,
    succ,
    add_digit,
    xi,
    qk,
    row_total,
    counts,
    drop_digit,
    pv,
    arr_cum,
    gamma,
    omega,
    offset,
    scale,
    eps_hi,
    eps_lo,
    eps_decay_slots,
):
    A = xi.shape[0]
    K = cur.shape[0]
    rng = _U64(rng)
    cost_sum = 0.0
    blocked = 0
    for t in range(nslots):
        rng, f = _env_step(rng, cur, qk, row_total, counts, drop_digit, arr_cum)
        aidx = 0
        for k in range(K):
            aidx += cur[k] * pv[k]
        sidx = f * A + aidx
        w[sidx] += 1
        cost_sum += xi[aidx]
        # Greedy value of the freshly observed state, for the pending update.
        minq = np.inf
        for a in range(K + 1):
            if succ[aidx, f, a] >= 0 and qtab[sidx, a] < minq:
                minq = qtab[sidx, a]
        if prev_sidx >= 0:
            n = qvisits[prev_sidx, prev_a]
            alpha = scale / (offset + n) ** omega
            target = xi[prev_sidx % A] + gamma * minq
            qtab[prev_sidx, prev_a] += alpha * (target - qtab[prev_sidx, prev_a])
            qvisits[prev_sidx, prev_a] = n + 1
        # Epsilon-greedy selection.
        tg = t_global + t
        if tg < eps_decay_slots:
            eps = eps_hi - (eps_hi - eps_lo) * tg / eps_decay_slots
        else:
            eps = eps_lo
        rng, ue = _uniform(rng)
        if ue < eps:
            nfeas = 0
            for a in range(K + 1):
                if succ[aidx, f, a] >= 0:
                    nfeas += 1
            rng, uc = _uniform(rng)
            pick = int(uc * nfeas)
            if pick >= nfeas:
                pick = nfeas - 1
            chosen = 0
            seen = 0
            for a in range(K + 1):
                if succ[aidx, f, a] >= 0:
                    if seen == pick:
                        chosen = a
                        break
                    seen += 1
        else:
            best = np.inf
            chosen = 0
            for a in range(K + 1):
                if succ[aidx, f, a] >= 0 and qtab[sidx, a] < best:
                    best = qtab[sidx, a]
                    chosen = a
        policy[sidx] = chosen
        if f > 0 and chosen == 0:
            blocked += 1
        prev_sidx = sidx
        prev_a = chosen
        if chosen > 0:
            cur[chosen - 1] = add_digit[chosen - 1, cur[chosen - 1], f - 1]
    return rng, prev_sidx, prev_a, cost_sum, blocked


@njit(cache=True)
def eval_chunk(
    nslots,
    rng,
    cur,
    policy,
    succ,
    add_digit,
    xi,
    qk,
    row_total,
    counts,
    drop_digit,
    pv,
    arr_cum,
):
    A = xi.shape[0]
    K = cur.shape[0]
    rng = _U64(rng)
    cost_sum = 0.0
    blocked = 0
    for _ in range(nslots):
        rng, f = _env_step(rng, cur, qk, row_total, counts, drop_digit, arr_cum)
        aidx = 0
        for k in range(K):
            aidx += cur[k] * pv[k]
        sidx = f * A + aidx
        cost_sum += xi[aidx]
        a = policy[sidx]
        if succ[aidx, f, a] < 0:
            # Defensive: a total policy is always feasible; fall back to the
            # lowest feasible action rather than corrupting the trajectory.
            for alt in range(K + 1):
                if succ[aidx, f, alt] >= 0:
                    a = alt
                    break
        if f > 0 and a == 0:
            blocked += 1
        if a > 0:
            cur[a - 1] = add_digit[a - 1, cur[a - 1], f - 1]
    return rng, cost_sum, blocked
