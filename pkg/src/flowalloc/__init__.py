"""Delay- and energy-aware flow allocation over heterogeneous UPFs.

Simulator, exact dynamic-programming solver, and online learners
(post-decision-state value iteration and a tabular Q-learning baseline)
for the slotted admission-and-placement MDP, plus an experiment harness.
"""

from .config import ConfigError, ModelConfig, reference_config
from .compiled import CompiledModel
from .indexing import InstanceTooLargeError, StateIndexer, enumerate_states
from .model import (
    FeasibilityError,
    PostDecisionState,
    SystemState,
    stage_cost,
)

__all__ = [
    "CompiledModel",
    "ConfigError",
    "FeasibilityError",
    "InstanceTooLargeError",
    "ModelConfig",
    "PostDecisionState",
    "StateIndexer",
    "SystemState",
    "enumerate_states",
    "reference_config",
    "stage_cost",
]
