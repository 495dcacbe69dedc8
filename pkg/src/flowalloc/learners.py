"""Online model-free learners driven by the simulated environment.

Both learners follow the same slot recipe: the environment realizes
departures from the current post-decision state and the next arrival, the
learner observes the resulting pre-decision state, updates one table entry,
picks the next action, and moves to the next post-decision state.

Each learner has two equivalent drive paths: a pure-Python per-slot step
(`apply_outcome` / `q_step`), and a chunked compiled loop (`run`) used for
long runs. Both consume the same RNG stream in the same order and produce
bit-identical trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .compiled import CompiledModel
from .env import RngStream, SlotOutcome, reset, step
from .model import PostDecisionState, SystemState


@dataclass(frozen=True)
class StepSchedule:
    """Per-entry step sizes 1 / (offset + n)**omega over the visit count n.

    With omega in (0.5, 1] the sequence sums to infinity while its squares
    sum to a finite value, the classical stochastic-approximation condition.
    """

    omega: float = 0.7
    offset: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if not 0.5 < self.omega <= 1.0:
            raise ValueError("omega must lie in (0.5, 1]")
        if self.offset < 1.0:
            raise ValueError("offset must be >= 1")
        if not 0.0 < self.scale <= self.offset**self.omega:
            raise ValueError("scale must be in (0, offset**omega] so alpha_0 <= 1")

    def alpha(self, n: int) -> float:
        return self.scale / (self.offset + n) ** self.omega

    @classmethod
    def search_then_converge(cls, omega: float, horizon: float) -> "StepSchedule":
        """Steps stay near 1 for about ``horizon`` visits, then decay as n**-omega."""
        return cls(omega=omega, offset=horizon, scale=horizon**omega)


@dataclass
class TrainTrace:
    """Per-slot training records, used by the metric recomputation oracles."""

    slot: list = field(default_factory=list)
    state_index: list = field(default_factory=list)
    action: list = field(default_factory=list)
    cost: list = field(default_factory=list)
    blocked: list = field(default_factory=list)

    def append(self, slot, state_index, action, cost, blocked):
        self.slot.append(slot)
        self.state_index.append(state_index)
        self.action.append(action)
        self.cost.append(cost)
        self.blocked.append(blocked)


class _LearnerBase:
    def __init__(self, cm: CompiledModel, seed: int, schedule: StepSchedule):
        self.cm = cm
        self.schedule = schedule
        self.rng = RngStream(seed)
        cfg = cm.cfg
        start = reset(cfg)
        self._cur_digits = np.array(
            [cm.indexer._vector_index[k][start.alloc[k]] for k in range(cfg.K)],
            dtype=np.int64,
        )
        self._last_f = 0
        self.w = np.zeros(cm.S, dtype=np.int64)
        self.policy = np.full(cm.S, -1, dtype=np.int8)
        self.slots = 0
        self.cost_sum = 0.0
        self.blocked = 0
        self.trace: TrainTrace | None = None

    @property
    def current(self) -> PostDecisionState:
        """Current post-decision state (arrival component is informational)."""
        idx = self.cm.indexer
        alloc = tuple(
            idx.per_upf_vectors[k][self._cur_digits[k]]
            for k in range(self.cm.cfg.K)
        )
        return PostDecisionState(alloc, self._last_f)

    def _cur_alloc_index(self) -> int:
        return int((self._cur_digits * self.cm.place_values).sum())

    def _sync_digits(self, alloc) -> None:
        """Adopt a realized pre-decision allocation (after departures)."""
        idx = self.cm.indexer
        for k in range(self.cm.cfg.K):
            self._cur_digits[k] = idx._vector_index[k][tuple(alloc[k])]

    def _advance(self, aidx: int, f: int, action: int) -> None:
        if action > 0:
            k = action - 1
            self._cur_digits[k] = self.cm.add_digit[k, self._cur_digits[k], f - 1]
        self._last_f = f

    def avg_cost(self) -> float:
        return self.cost_sum / self.slots if self.slots else float("nan")

    def total_policy(self) -> np.ndarray:
        """Last-visited-action map, unvisited states filled greedily."""
        greedy = self.cm.greedy_policy(self._pds_view())
        return np.where(self.policy >= 0, self.policy, greedy).astype(np.int8)

    def _kernel_args(self):
        cm = self.cm
        return (
            cm.succ, cm.add_digit, cm.xi, cm.qk, cm.row_total, cm.counts,
            cm.drop_digit, cm.place_values, cm.arr_cum,
        )


class PdsLearner(_LearnerBase):
    """Post-decision-state value iteration (the structure-aware learner).

    The value table is keyed by the allocation matrix alone: the PDS value
    is independent of the pending arrival, so one write per slot updates
    every arrival variant of that allocation at once. Action selection is
    purely greedy; the expectation-outside-minimum structure of the update
    makes explicit exploration unnecessary.
    """

    def __init__(self, cm, seed=0, schedule: StepSchedule | None = None):
        super().__init__(cm, seed, schedule or StepSchedule())
        self.table = np.zeros(cm.A, dtype=np.float64)
        self.visits = np.zeros(cm.A, dtype=np.int64)
        self._pds_aidx = self._cur_alloc_index()

    def _pds_view(self):
        return self.table

    def apply_outcome(self, outcome: SlotOutcome) -> int:
        """One pure-Python slot; mirrors the compiled loop exactly."""
        cm = self.cm
        f = outcome.next_arrival
        aidx = cm.indexer.alloc_index(outcome.next_state.alloc)
        sidx = f * cm.A + aidx
        self.w[sidx] += 1
        xi_a = cm.xi[aidx]
        self.cost_sum += xi_a
        self.slots += 1
        best = np.inf
        besta = 0
        for a in range(cm.cfg.K + 1):
            nxt = cm.succ[aidx, f, a]
            if nxt >= 0:
                val = xi_a + cm.gamma * self.table[nxt]
                if val < best:
                    best = val
                    besta = a
        alpha = self.schedule.alpha(int(self.visits[self._pds_aidx]))
        self.table[self._pds_aidx] += alpha * (best - self.table[self._pds_aidx])
        self.visits[self._pds_aidx] += 1
        self.policy[sidx] = besta
        blocked = f > 0 and besta == 0
        if blocked:
            self.blocked += 1
        if self.trace is not None:
            self.trace.append(self.slots, sidx, besta, xi_a, blocked)
        self._pds_aidx = int(cm.succ[aidx, f, besta])
        self._sync_digits(outcome.next_state.alloc)
        self._advance(aidx, f, besta)
        return besta

    def run(self, nslots: int) -> None:
        """Advance the learner by nslots slots through the compiled loop."""
        rng, pds_aidx, cost, blocked = _kernels.pds_train_chunk(
            nslots,
            np.uint64(self.rng._state),
            self._pds_aidx,
            self._cur_digits,
            self.table,
            self.visits,
            self.policy,
            self.w,
            *self._kernel_args(),
            self.cm.gamma,
            self.schedule.omega,
            self.schedule.offset,
            self.schedule.scale,
        )
        self.rng._state = int(rng)
        self._pds_aidx = int(pds_aidx)
        self.slots += nslots
        self.cost_sum += cost
        self.blocked += int(blocked)

    def derived_value(self) -> np.ndarray:
        return self.cm.value_from_pds(self.table)


class QLearner(_LearnerBase):
    """Tabular Q-learning baseline with epsilon-greedy exploration.

    Epsilon decays linearly from eps_hi to eps_lo over the first
    eps_decay_slots slots, then stays constant. Storage is per
    (state, action) pair.
    """

    def __init__(
        self,
        cm,
        seed=0,
        schedule: StepSchedule | None = None,
        eps_hi: float = 1.0,
        eps_lo: float = 0.01,
        eps_decay_slots: int = 1,
    ):
        super().__init__(cm, seed, schedule or StepSchedule())
        self.qtable = np.zeros((cm.S, cm.cfg.K + 1), dtype=np.float64)
        self.qvisits = np.zeros((cm.S, cm.cfg.K + 1), dtype=np.int64)
        self.eps_hi = eps_hi
        self.eps_lo = eps_lo
        self.eps_decay_slots = max(1, int(eps_decay_slots))
        self._prev_sidx = -1
        self._prev_a = 0

    def total_policy(self) -> np.ndarray:
        qv = np.where(
            self.cm.succ.transpose(1, 0, 2).reshape(self.cm.S, -1) >= 0,
            self.qtable,
            np.inf,
        )
        greedy = qv.argmin(axis=1).astype(np.int8)
        return np.where(self.policy >= 0, self.policy, greedy).astype(np.int8)

    def epsilon(self, t: int) -> float:
        if t < self.eps_decay_slots:
            return self.eps_hi - (self.eps_hi - self.eps_lo) * t / self.eps_decay_slots
        return self.eps_lo

    def select(self, s: SystemState) -> int:
        """Epsilon-greedy over the feasible set, lowest index on ties."""
        cm = self.cm
        aidx = cm.indexer.alloc_index(s.alloc)
        sidx = s.arrival * cm.A + aidx
        feas = [a for a in range(cm.cfg.K + 1) if cm.succ[aidx, s.arrival, a] >= 0]
        ue = self.rng.uniform()
        if ue < self.epsilon(self.slots):
            uc = self.rng.uniform()
            pick = min(int(uc * len(feas)), len(feas) - 1)
            return feas[pick]
        best = np.inf
        chosen = 0
        for a in feas:
            if self.qtable[sidx, a] < best:
                best = self.qtable[sidx, a]
                chosen = a
        return chosen

    def update(self, s: SystemState, a: int, next_s: SystemState) -> None:
        """Standard one-step update toward cost plus discounted greedy value."""
        cm = self.cm
        sidx = cm.indexer.index_of(s)
        next_aidx = cm.indexer.alloc_index(next_s.alloc)
        next_sidx = next_s.arrival * cm.A + next_aidx
        minq = min(
            self.qtable[next_sidx, aa]
            for aa in range(cm.cfg.K + 1)
            if cm.succ[next_aidx, next_s.arrival, aa] >= 0
        )
        alpha = self.schedule.alpha(int(self.qvisits[sidx, a]))
        target = cm.xi[sidx % cm.A] + cm.gamma * minq
        self.qtable[sidx, a] += alpha * (target - self.qtable[sidx, a])
        self.qvisits[sidx, a] += 1

    def q_step(self, outcome: SlotOutcome) -> int:
        """One pure-Python slot; mirrors the compiled loop exactly."""
        cm = self.cm
        f = outcome.next_arrival
        s_next = outcome.next_state
        aidx = cm.indexer.alloc_index(s_next.alloc)
        sidx = f * cm.A + aidx
        self.w[sidx] += 1
        xi_a = cm.xi[aidx]
        self.cost_sum += xi_a
        if self._prev_sidx >= 0:
            prev_state = cm.indexer.state_from_index(self._prev_sidx)
            self.update(prev_state, self._prev_a, s_next)
        chosen = self.select(s_next)
        self.slots += 1
        self.policy[sidx] = chosen
        blocked = f > 0 and chosen == 0
        if blocked:
            self.blocked += 1
        if self.trace is not None:
            self.trace.append(self.slots, sidx, chosen, xi_a, blocked)
        self._prev_sidx = sidx
        self._prev_a = chosen
        self._sync_digits(s_next.alloc)
        self._advance(aidx, f, chosen)
        return chosen

    def run(self, nslots: int) -> None:
        rng, prev_sidx, prev_a, cost, blocked = _kernels.q_train_chunk(
            nslots,
            self.slots,
            np.uint64(self.rng._state),
            self._prev_sidx,
            self._prev_a,
            self._cur_digits,
            self.qtable,
            self.qvisits,
            self.policy,
            self.w,
            *self._kernel_args(),
            self.cm.gamma,
            self.schedule.omega,
            self.schedule.offset,
            self.schedule.scale,
            self.eps_hi,
            self.eps_lo,
            self.eps_decay_slots,
        )
        self.rng._state = int(rng)
        self._prev_sidx = int(prev_sidx)
        self._prev_a = int(prev_a)
        self.slots += nslots
        self.cost_sum += cost
        self.blocked += int(blocked)

    def derived_value(self) -> np.ndarray:
        """Greedy value per state: minimum Q over the feasible actions."""
        qv = np.where(
            self.cm.succ.transpose(1, 0, 2).reshape(self.cm.S, -1) >= 0,
            self.qtable,
            np.inf,
        )
        return qv.min(axis=1)


def _train(learner, slots, snapshot_every=None, hook=None, pure=False):
    if pure:
        cfg = learner.cm.cfg
        is_pds = isinstance(learner, PdsLearner)
        for t in range(slots):
            outcome = step(learner.current, cfg, learner.rng)
            if is_pds:
                learner.apply_outcome(outcome)
            else:
                learner.q_step(outcome)
            if snapshot_every and (t + 1) % snapshot_every == 0 and hook:
                hook(learner)
        return learner
    chunk = snapshot_every or slots
    done = 0
    while done < slots:
        n = min(chunk, slots - done)
        learner.run(n)
        done += n
        if hook and (snapshot_every is None or done % snapshot_every == 0 or done == slots):
            hook(learner)
    return learner


def pds_vi_train(
    cm: CompiledModel,
    slots: int,
    seed: int,
    schedule: StepSchedule | None = None,
    snapshot_every: int | None = None,
    hook=None,
    record_trace: bool = False,
) -> PdsLearner:
    """Train the PDS learner for a number of slots from a cold start."""
    learner = PdsLearner(cm, seed=seed, schedule=schedule)
    if record_trace:
        learner.trace = TrainTrace()
    return _train(learner, slots, snapshot_every, hook, pure=record_trace)


def q_learning_train(
    cm: CompiledModel,
    slots: int,
    seed: int,
    schedule: StepSchedule | None = None,
    snapshot_every: int | None = None,
    hook=None,
    record_trace: bool = False,
    eps_hi: float = 1.0,
    eps_lo: float = 0.01,
    eps_decay_frac: float = 0.2,
) -> QLearner:
    """Train the Q-learning baseline for a number of slots from a cold start."""
    learner = QLearner(
        cm,
        seed=seed,
        schedule=schedule,
        eps_hi=eps_hi,
        eps_lo=eps_lo,
        eps_decay_slots=max(1, int(eps_decay_frac * slots)),
    )
    if record_trace:
        learner.trace = TrainTrace()
    return _train(learner, slots, snapshot_every, hook, pure=record_trace)
