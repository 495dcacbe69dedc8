"""Exact definition of the flow-allocation MDP.

Allocation matrices are tuples of per-UPF row tuples so states are hashable
and immutable. Flow types are 1-based (``f = 0`` means "no arrival"); UPF
indices in actions are 1-based (``a = 0`` means "block").
"""

from __future__ import annotations

from typing import NamedTuple

from .config import ModelConfig

AllocationMatrix = tuple  # tuple[tuple[int, ...], ...], K rows of M counts
Action = int


class FeasibilityError(ValueError):
    """An allocation or action violates the strict capacity constraint."""


class SystemState(NamedTuple):
    """Pre-decision state: allocation matrix plus this slot's arrival type."""

    alloc: AllocationMatrix
    arrival: int


class PostDecisionState(NamedTuple):
    """Virtual state right after acting, before departures and the next arrival."""

    alloc: AllocationMatrix
    arrival: int


def empty_alloc(cfg: ModelConfig) -> AllocationMatrix:
    return tuple((0,) * cfg.M for _ in range(cfg.K))


def load_rate(alloc: AllocationMatrix, k: int, cfg: ModelConfig):
    """Total average rate UPF k must support (exact for integer rates)."""
    if not 1 <= k <= cfg.K:
        raise IndexError(f"UPF index {k} out of range [1, {cfg.K}]")
    row = alloc[k - 1]
    return sum(row[m] * cfg.mean_rate[m] for m in range(cfg.M))


def is_feasible_alloc(alloc: AllocationMatrix, cfg: ModelConfig) -> bool:
    """Strict capacity feasibility on every UPF, nonnegative integer counts."""
    if len(alloc) != cfg.K:
        return False
    for k in range(1, cfg.K + 1):
        row = alloc[k - 1]
        if len(row) != cfg.M or any(c < 0 for c in row):
            return False
        if not load_rate(alloc, k, cfg) < cfg.capacity[k - 1]:
            return False
    return True


def stage_cost(alloc: AllocationMatrix, cfg: ModelConfig) -> float:
    """Per-slot cost: power cost plus delay cost, summed over UPFs.

    Depends only on the allocation matrix, never on the arrival component.
    """
    total = 0.0
    for k in range(1, cfg.K + 1):
        rate = load_rate(alloc, k, cfg)
        cap = cfg.capacity[k - 1]
        if not rate < cap:
            raise FeasibilityError(
                f"UPF {k} load {rate} violates strict capacity {cap}"
            )
        total += cfg.unit_power_cost[k - 1] * rate + cap / (cap - rate)
    return total


def feasible_actions(s: SystemState, cfg: ModelConfig) -> list[Action]:
    """Feasible action set, ascending by UPF index.

    With no arrival the only action is the no-op 0. With an arrival, the set
    is every UPF that can host the flow under the strict capacity constraint;
    an admissible flow must be admitted, so 0 is available only when no UPF
    can host it.
    """
    if s.arrival == 0:
        return [0]
    rate_f = cfg.mean_rate[s.arrival - 1]
    ks = [
        k
        for k in range(1, cfg.K + 1)
        if cfg.capacity[k - 1] > load_rate(s.alloc, k, cfg) + rate_f
    ]
    return ks if ks else [0]


def action_matrix(a: Action, f: int, cfg: ModelConfig) -> tuple:
    """K x M 0/1 indicator: a single 1 at (a, f) when a flow is placed."""
    return tuple(
        tuple(
            1 if (a == k and f == m and a != 0 and f != 0) else 0
            for m in range(1, cfg.M + 1)
        )
        for k in range(1, cfg.K + 1)
    )


def apply_action(s: SystemState, a: Action, cfg: ModelConfig) -> PostDecisionState:
    """Add the placed flow (if any) to the allocation matrix."""
    if a not in feasible_actions(s, cfg):
        raise FeasibilityError(f"action {a} infeasible in state {s}")
    if a == 0 or s.arrival == 0:
        return PostDecisionState(s.alloc, s.arrival)
    rows = [list(row) for row in s.alloc]
    rows[a - 1][s.arrival - 1] += 1
    return PostDecisionState(tuple(tuple(r) for r in rows), s.arrival)


def departure_distribution_upf(post_row: tuple, q_k: float) -> list[tuple[tuple, float]]:
    """Distribution of one UPF's departure row, given its post-decision row.

    With probability ``q_k`` one flow, chosen uniformly among those present,
    departs; otherwise nothing does. An empty row never loses anything.
    Returned entries are (departure row u_k, probability) with positive
    probabilities summing to 1.
    """
    m_count = len(post_row)
    total = sum(post_row)
    zero = (0,) * m_count
    if total == 0 or q_k == 0.0:
        return [(zero, 1.0)]
    out = []
    if q_k < 1.0:
        out.append((zero, 1.0 - q_k))
    for m in range(m_count):
        if post_row[m] > 0:
            e_m = tuple(1 if j == m else 0 for j in range(m_count))
            out.append((e_m, q_k * post_row[m] / total))
    return out


def arrival_distribution(cfg: ModelConfig) -> list[tuple[int, float]]:
    """Distribution of the next arrival type: (f', probability), positive only."""
    out = []
    if cfg.arrival_prob < 1.0:
        out.append((0, 1.0 - cfg.arrival_prob))
    for m in range(1, cfg.M + 1):
        pr = cfg.arrival_prob * cfg.type_prob[m - 1]
        if pr > 0.0:
            out.append((m, pr))
    return out


def transition_distribution(
    s: SystemState, a: Action, cfg: ModelConfig
) -> list[tuple[SystemState, float]]:
    """Exact one-slot transition kernel for a (state, action) pair.

    Departures act on the post-decision allocation (so a flow arriving in a
    slot can depart in the same slot), independently per UPF, and the next
    arrival is independent of everything else. Successors reached through
    several (departure, arrival) combinations are merged.
    """
    pds = apply_action(s, a, cfg)
    # Product over UPFs of the per-row departure distributions.
    alloc_dist: list[tuple[tuple, float]] = [((), 1.0)]
    for k in range(cfg.K):
        post_row = pds.alloc[k]
        per_row = departure_distribution_upf(post_row, cfg.departure_prob[k])
        alloc_dist = [
            (
                rows + (tuple(post_row[m] - u_k[m] for m in range(cfg.M)),),
                pr * pr_k,
            )
            for rows, pr in alloc_dist
            for u_k, pr_k in per_row
        ]
    merged: dict[SystemState, float] = {}
    for rows, pr in alloc_dist:
        for f_next, pr_f in arrival_distribution(cfg):
            nxt = SystemState(rows, f_next)
            merged[nxt] = merged.get(nxt, 0.0) + pr * pr_f
    return sorted(merged.items())
