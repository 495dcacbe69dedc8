"""Dense array form of an enumerated instance.

Everything downstream of the pure-Python model (DP solver, learners,
experiment harness) works on these tables instead of tuples-of-tuples:
stage costs per allocation index, the feasible-action successor table, and
per-UPF departure structures, all keyed by the mixed-radix indexing scheme.
"""

from __future__ import annotations

import numpy as np

from .config import ModelConfig
from .indexing import StateIndexer, enumerate_states
from .model import stage_cost

NO_ACTION = -1  # sentinel in the successor table: action not in A(s)


class CompiledModel:
    """Numpy tables for one instance.

    Attributes
    ----------
    xi : (A,) stage cost per allocation index.
    succ : (A, M+1, K+1) int32. ``succ[n, f, a]`` is the allocation index
        after taking action ``a`` in pre-decision state ``(n, f)``, or -1
        when ``a`` is not feasible there. Forced admission is baked in:
        blocking (a=0) is available only when no UPF can host the arrival.
    add_digit / drop_digit : (K, rmax, M) int32 per-UPF row-vector moves
        (add or remove one type-m flow), -1 when the move leaves the
        feasible set (add) or removes an absent flow (drop).
    counts / row_total : per-UPF row-vector flow counts, for departure
        sampling.
    dep_mats : per-UPF departure transition matrices D[v, v'] over row
        vector indices, from a post-decision row to the next row.
    """

    def __init__(self, cfg: ModelConfig, indexer: StateIndexer | None = None):
        self.cfg = cfg
        self.indexer = indexer if indexer is not None else enumerate_states(cfg)
        idx = self.indexer
        K, M = cfg.K, cfg.M
        A = idx.total_allocs
        self.A = A
        self.S = idx.total_states
        rmax = max(idx.radices)
        self.radices = np.asarray(idx.radices, dtype=np.int64)
        self.place_values = np.asarray(idx._place_values, dtype=np.int64)

        self.counts = np.zeros((K, rmax, M), dtype=np.int32)
        self.row_total = np.zeros((K, rmax), dtype=np.int32)
        self.add_digit = np.full((K, rmax, M), -1, dtype=np.int32)
        self.drop_digit = np.full((K, rmax, M), -1, dtype=np.int32)
        row_load = np.zeros((K, rmax), dtype=np.float64)
        for k in range(K):
            vectors = idx.per_upf_vectors[k]
            lookup = idx._vector_index[k]
            for v, row in enumerate(vectors):
                self.counts[k, v, :] = row
                self.row_total[k, v] = sum(row)
                row_load[k, v] = sum(
                    row[m] * cfg.mean_rate[m] for m in range(M)
                )
                for m in range(M):
                    up = tuple(
                        row[j] + 1 if j == m else row[j] for j in range(M)
                    )
                    if up in lookup:
                        self.add_digit[k, v, m] = lookup[up]
                    if row[m] > 0:
                        down = tuple(
                            row[j] - 1 if j == m else row[j] for j in range(M)
                        )
                        self.drop_digit[k, v, m] = lookup[down]

        # Per-allocation digit decomposition and stage costs.
        alloc_ids = np.arange(A, dtype=np.int64)
        digits = np.empty((A, K), dtype=np.int64)
        for k in range(K):
            digits[:, k] = (alloc_ids // self.place_values[k]) % self.radices[k]
        self.digits = digits
        loads = np.take_along_axis(
            row_load, digits.T, axis=1
        )  # (K, A) load per UPF
        power = np.asarray(cfg.unit_power_cost, dtype=np.float64)[:, None]
        caps = np.asarray(cfg.capacity, dtype=np.float64)[:, None]
        self.xi = np.ascontiguousarray(
            (power * loads + caps / (caps - loads)).sum(axis=0)
        )

        # Successor table with forced admission.
        succ = np.full((A, M + 1, K + 1), NO_ACTION, dtype=np.int32)
        succ[:, 0, 0] = alloc_ids
        for f in range(1, M + 1):
            any_feasible = np.zeros(A, dtype=bool)
            for k in range(K):
                new_digit = self.add_digit[k, digits[:, k], f - 1]
                ok = new_digit >= 0
                any_feasible |= ok
                moved = alloc_ids + (new_digit - digits[:, k]) * self.place_values[k]
                succ[:, f, k + 1] = np.where(ok, moved, NO_ACTION)
            succ[:, f, 0] = np.where(any_feasible, NO_ACTION, alloc_ids)
        self.succ = np.ascontiguousarray(succ)

        # Arrival distribution (index 0 = no arrival).
        probs = np.empty(M + 1, dtype=np.float64)
        probs[0] = 1.0 - cfg.arrival_prob
        probs[1:] = cfg.arrival_prob * np.asarray(cfg.type_prob)
        self.arr_probs = probs
        self.arr_cum = np.cumsum(probs)
        self.qk = np.asarray(cfg.departure_prob, dtype=np.float64)
        self.gamma = cfg.discount

        # Per-UPF departure transition matrices over row-vector indices.
        self.dep_mats = []
        for k in range(K):
            r = idx.radices[k]
            D = np.zeros((r, r), dtype=np.float64)
            for v in range(r):
                tot = self.row_total[k, v]
                if tot == 0 or self.qk[k] == 0.0:
                    D[v, v] = 1.0
                    continue
                D[v, v] = 1.0 - self.qk[k]
                for m in range(M):
                    if self.counts[k, v, m] > 0:
                        D[v, self.drop_digit[k, v, m]] += (
                            self.qk[k] * self.counts[k, v, m] / tot
                        )
            self.dep_mats.append(D)

    # ----- value-table plumbing -------------------------------------------

    def state_index(self, alloc_index: int, f: int) -> int:
        return f * self.A + alloc_index

    def action_values(self, vtilde: np.ndarray) -> np.ndarray:
        """Per-(allocation, arrival, action) one-step values, inf when infeasible."""
        safe = np.maximum(self.succ, 0)
        cand = self.xi[:, None, None] + self.gamma * vtilde[safe]
        return np.where(self.succ >= 0, cand, np.inf)

    def value_from_pds(self, vtilde: np.ndarray) -> np.ndarray:
        """Pre-decision values from a PDS table: min over feasible actions."""
        v_af = self.action_values(vtilde).min(axis=2)  # (A, M+1)
        return np.ascontiguousarray(v_af.T.reshape(-1))

    def greedy_policy(self, vtilde: np.ndarray) -> np.ndarray:
        """Greedy action per state index, lowest action index on ties."""
        act = self.action_values(vtilde).argmin(axis=2).astype(np.int8)
        return np.ascontiguousarray(act.T.reshape(-1))

    def expect_departures(self, g: np.ndarray) -> np.ndarray:
        """E_u[g(alloc - u)] for a function g over allocation indices.

        Departures are independent across UPFs, so the expectation is a
        sequence of one-axis contractions with the per-UPF matrices.
        """
        t = g.reshape(tuple(self.radices))
        for k in range(self.cfg.K):
            t = np.moveaxis(np.tensordot(self.dep_mats[k], t, axes=([1], [k])), 0, k)
        return t.reshape(-1)
