"""Metric computation: relative Bellman error, running costs, blocking."""

from __future__ import annotations

import numpy as np

from .learners import TrainTrace


class MetricsError(ValueError):
    """A metric is undefined for the given inputs."""


def rbe(v: np.ndarray, vstar: np.ndarray, w: np.ndarray) -> float:
    """Visit-weighted relative error of a value table against the ground truth.

    Weighted by how often each state was visited, so rarely seen states do
    not dominate the error. Undefined when nothing was visited.
    """
    if v.shape != vstar.shape or v.shape != w.shape:
        raise MetricsError("value tables and weights must have the same length")
    wsum = w.sum()
    if wsum <= 0:
        raise MetricsError("all-zero visit weights: RBE undefined")
    num = float((w * np.abs(v - vstar)).sum())
    den = float((w * np.abs(vstar)).sum())
    return num / den


def time_average_cost(trace: TrainTrace, upto: int) -> float:
    """Running mean of the recorded per-slot stage costs."""
    if upto < 1:
        raise MetricsError("time-average cost needs at least one slot")
    if upto > len(trace.cost):
        raise MetricsError(f"trace has only {len(trace.cost)} slots")
    return float(np.mean(trace.cost[:upto]))


def blocked_series(trace: TrainTrace) -> np.ndarray:
    """Cumulative count of arrivals that had to be blocked, per slot."""
    return np.cumsum(np.asarray(trace.blocked, dtype=np.int64))
