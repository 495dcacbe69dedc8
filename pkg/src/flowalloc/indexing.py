"""Dense integer indexing of the feasible state space.

Feasible per-UPF row vectors are enumerated once, in lexicographic order.
An allocation matrix maps to a mixed-radix number over its per-UPF vector
indices (UPF 1 most significant); a state index prepends the arrival type
as the most significant digit: ``state = f * total_allocs + alloc``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import ModelConfig
from .model import AllocationMatrix, SystemState

DEFAULT_STATE_CAP = 10**8


class InstanceTooLargeError(ValueError):
    """The instance's state space exceeds the configured cap."""


def _feasible_row_vectors(cfg: ModelConfig, k: int, cap: int) -> list[tuple]:
    """All rows (n_1..n_M) with sum n_m * rate_m strictly below capacity[k]."""
    capacity = cfg.capacity[k - 1]
    out: list[tuple] = []

    def rec(prefix: tuple, load):
        if len(prefix) == cfg.M:
            out.append(prefix)
            if len(out) > cap:
                raise InstanceTooLargeError(
                    f"more than {cap} feasible rows for UPF {k}"
                )
            return
        rate = cfg.mean_rate[len(prefix)]
        n = 0
        while load + n * rate < capacity:
            rec(prefix + (n,), load + n * rate)
            n += 1

    rec((), 0)
    return out


@dataclass(frozen=True)
class StateIndexer:
    """Bijection between feasible states and dense integer indices."""

    per_upf_vectors: tuple[tuple[tuple, ...], ...]
    radices: tuple[int, ...]
    total_allocs: int
    total_states: int
    _vector_index: tuple[dict, ...]
    _place_values: tuple[int, ...]

    def alloc_index(self, alloc: AllocationMatrix) -> int:
        idx = 0
        for k, row in enumerate(alloc):
            idx += self._vector_index[k][tuple(row)] * self._place_values[k]
        return idx

    def alloc_from_index(self, idx: int) -> AllocationMatrix:
        if not 0 <= idx < self.total_allocs:
            raise IndexError(f"allocation index {idx} out of range")
        return tuple(
            self.per_upf_vectors[k][(idx // self._place_values[k]) % self.radices[k]]
            for k in range(len(self.radices))
        )

    def index_of(self, s: SystemState) -> int:
        return s.arrival * self.total_allocs + self.alloc_index(s.alloc)

    def state_from_index(self, idx: int) -> SystemState:
        if not 0 <= idx < self.total_states:
            raise IndexError(f"state index {idx} out of range")
        f, alloc_idx = divmod(idx, self.total_allocs)
        return SystemState(self.alloc_from_index(alloc_idx), f)


def enumerate_states(cfg: ModelConfig, cap: int = DEFAULT_STATE_CAP) -> StateIndexer:
    """Enumerate the feasible state space of an instance.

    Raises InstanceTooLargeError when the state count would exceed ``cap``;
    state spaces grow exponentially in K and M, so accidental huge instances
    fail fast instead of crawling.
    """
    vectors = []
    total_allocs = 1
    for k in range(1, cfg.K + 1):
        vs = _feasible_row_vectors(cfg, k, cap)
        vectors.append(tuple(vs))
        total_allocs *= len(vs)
        if total_allocs * (cfg.M + 1) > cap:
            raise InstanceTooLargeError(
                f"instance too large: more than {cap} states "
                f"(already {total_allocs * (cfg.M + 1)} after UPF {k})"
            )
    radices = tuple(len(vs) for vs in vectors)
    place_values = []
    pv = total_allocs
    for r in radices:
        pv //= r
        place_values.append(pv)
    lookup = tuple({v: i for i, v in enumerate(vs)} for vs in vectors)
    return StateIndexer(
        per_upf_vectors=tuple(vectors),
        radices=radices,
        total_allocs=total_allocs,
        total_states=total_allocs * (cfg.M + 1),
        _vector_index=lookup,
        _place_values=tuple(place_values),
    )
