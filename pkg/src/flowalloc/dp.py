"""Exact dynamic-programming solver with full knowledge of the kernel.

Two equivalent routes to the optimal values: direct value iteration over
pre-decision states (used as a cross-check on small instances) and the
factored iteration over post-decision allocation matrices, whose tables are
(M+1) times smaller and whose sweep cost collapses to per-UPF contractions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compiled import CompiledModel
from .model import feasible_actions, transition_distribution

ValueTable = np.ndarray  # (total_states,) float64
PdsValueTable = np.ndarray  # (total_allocs,) float64
Policy = np.ndarray  # (total_states,) int8


@dataclass
class SolveResult:
    v: ValueTable
    vtilde: PdsValueTable
    policy: Policy
    sweeps: int
    final_delta: float


class DirectKernel:
    """Materialized transition rows for every (state, feasible action)."""

    def __init__(self, cm: CompiledModel):
        self.cm = cm
        idx = cm.indexer
        self.rows: list[list[tuple[np.ndarray, np.ndarray]]] = []
        for s_id in range(cm.S):
            s = idx.state_from_index(s_id)
            per_action = []
            for a in feasible_actions(s, cm.cfg):
                dist = transition_distribution(s, a, cm.cfg)
                ids = np.asarray([idx.index_of(ns) for ns, _ in dist], dtype=np.int64)
                pr = np.asarray([p for _, p in dist], dtype=np.float64)
                per_action.append((ids, pr))
            self.rows.append(per_action)

    def backup(self, v: ValueTable) -> ValueTable:
        """One synchronous sweep of the standard Bellman operator."""
        cm = self.cm
        xi_state = np.tile(cm.xi, cm.cfg.M + 1)
        out = np.empty_like(v)
        for s_id, per_action in enumerate(self.rows):
            best = np.inf
            for ids, pr in per_action:
                val = pr @ v[ids]
                if val < best:
                    best = val
            out[s_id] = xi_state[s_id] + cm.gamma * best
        return out


def bellman_backup_direct(
    v: ValueTable, cm: CompiledModel, kernel: DirectKernel | None = None
) -> ValueTable:
    if kernel is None:
        kernel = DirectKernel(cm)
    return kernel.backup(v)


def pds_bellman_backup(vt: PdsValueTable, cm: CompiledModel) -> PdsValueTable:
    """One sweep of the factored operator over post-decision allocations.

    The inner minimum over the next action is computed once per (successor
    allocation, arrival) pair; the outer expectation over departures is a
    chain of per-UPF contractions.
    """
    h = cm.action_values(vt).min(axis=2)  # (A, M+1)
    g = h @ cm.arr_probs
    return cm.expect_departures(g)


def value_from_pds(vt: PdsValueTable, cm: CompiledModel) -> ValueTable:
    return cm.value_from_pds(vt)


def pds_from_value(v: ValueTable, cm: CompiledModel) -> PdsValueTable:
    """Expected pre-decision value over the exogenous step out of each allocation."""
    out = np.zeros(cm.A, dtype=np.float64)
    for f in range(cm.cfg.M + 1):
        out += cm.arr_probs[f] * cm.expect_departures(v[f * cm.A : (f + 1) * cm.A])
    return out


def solve(
    cm: CompiledModel,
    tol: float = 1e-9,
    mode: str = "pds",
    max_sweeps: int = 10**6,
) -> SolveResult:
    """Iterate the chosen backup to its fixed point (sup-norm change <= tol)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if mode == "pds":
        vt = np.zeros(cm.A, dtype=np.float64)
        for sweep in range(1, max_sweeps + 1):
            nxt = pds_bellman_backup(vt, cm)
            delta = float(np.max(np.abs(nxt - vt)))
            vt = nxt
            if delta <= tol:
                break
        v = value_from_pds(vt, cm)
    elif mode == "direct":
        kernel = DirectKernel(cm)
        v = np.zeros(cm.S, dtype=np.float64)
        for sweep in range(1, max_sweeps + 1):
            nxt = kernel.backup(v)
            delta = float(np.max(np.abs(nxt - v)))
            v = nxt
            if delta <= tol:
                break
        vt = pds_from_value(v, cm)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    policy = cm.greedy_policy(vt)
    return SolveResult(v=v, vtilde=vt, policy=policy, sweeps=sweep, final_delta=delta)


# ----- persistence ---------------------------------------------------------


def save_value_csv(path, values: np.ndarray, config_hash: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        fh.write("state_index,value\n")
        for i, v in enumerate(values):
            fh.write(f"{i},{float(v)!r}\n")


def load_value_csv(path, expected_hash: str | None = None) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# config_hash="):
            raise ValueError(f"{path}: missing config hash header")
        found = header.split("=", 1)[1]
        if expected_hash is not None and found != expected_hash:
            raise ValueError(
                f"{path}: config hash mismatch ({found} != {expected_hash})"
            )
        fh.readline()  # column header
        values = [float(line.split(",")[1]) for line in fh if line.strip()]
    return np.asarray(values, dtype=np.float64)
