"""Seeded stochastic environment for one slot of the system.

The generator is a splitmix64 counter stream: trivially splittable (mix the
base seed with a run id for independent Monte Carlo streams) and cheap to
replicate inside the compiled training kernels, so the pure-Python sampler
here and the fast path draw bit-identical variates.

Draw-order contract, relied on by the kernels: one uniform per UPF in
ascending order (always, even for empty rows), a second uniform only when
that UPF loses a flow, then one uniform for the arrival.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import ModelConfig
from .model import (
    AllocationMatrix,
    PostDecisionState,
    SystemState,
    empty_alloc,
)

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """splitmix64 output mix; also used to derive per-run seeds."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(base_seed: int, run_id: int) -> int:
    """Independent stream seed for one Monte Carlo run."""
    return mix64((base_seed + _GOLDEN * (run_id + 1)) & _MASK)


class RngStream:
    """splitmix64 stream of uniforms in [0, 1)."""

    def __init__(self, seed: int):
        self.seed = seed & _MASK
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return mix64(self._state)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def spawn(self, run_id: int) -> "RngStream":
        return RngStream(derive_seed(self.seed, run_id))


@dataclass(frozen=True)
class SlotOutcome:
    """One realized slot: who left, what arrived, and the resulting state."""

    departures: tuple  # K x M 0/1 matrix
    next_arrival: int
    next_state: SystemState


def sample_departures(
    pds: PostDecisionState, cfg: ModelConfig, rng: RngStream
) -> tuple:
    """One departure matrix drawn from the post-decision allocation."""
    rows = []
    for k in range(cfg.K):
        post_row = pds.alloc[k]
        u_row = [0] * cfg.M
        u1 = rng.uniform()
        total = sum(post_row)
        if u1 < cfg.departure_prob[k] and total > 0:
            x = rng.uniform() * total
            cum = 0
            for m in range(cfg.M):
                cum += post_row[m]
                if x < cum:
                    u_row[m] = 1
                    break
        rows.append(tuple(u_row))
    return tuple(rows)


def sample_arrival(cfg: ModelConfig, rng: RngStream) -> int:
    """Next arrival type; 0 means no arrival."""
    u = rng.uniform()
    if u < 1.0 - cfg.arrival_prob:
        return 0
    cum = 1.0 - cfg.arrival_prob
    for m in range(1, cfg.M + 1):
        cum += cfg.arrival_prob * cfg.type_prob[m - 1]
        if u < cum:
            return m
    return cfg.M


def step(pds: PostDecisionState, cfg: ModelConfig, rng: RngStream) -> SlotOutcome:
    """Departures from the post-decision state, then the next arrival."""
    u = sample_departures(pds, cfg, rng)
    f_next = sample_arrival(cfg, rng)
    alloc = tuple(
        tuple(pds.alloc[k][m] - u[k][m] for m in range(cfg.M))
        for k in range(cfg.K)
    )
    return SlotOutcome(u, f_next, SystemState(alloc, f_next))


def reset(cfg: ModelConfig) -> PostDecisionState:
    """Cold start: empty system, no pending arrival."""
    return PostDecisionState(empty_alloc(cfg), 0)
