"""Problem configuration: all constants of the flow-allocation MDP."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

_PROB_TOL = 1e-12


class ConfigError(ValueError):
    """Raised when a configuration value violates a model invariant.

    The message always names the offending key.
    """


@dataclass(frozen=True)
class ModelConfig:
    """All problem constants for one instance.

    K UPFs with capacities ``capacity[k]`` (bits/s) and per-bit power costs
    ``unit_power_cost[k]``; M flow types with average rates ``mean_rate[m]``.
    A flow arrives each slot with probability ``arrival_prob`` and is of type
    m with probability ``type_prob[m]``; UPF k loses at most one flow per
    slot with probability ``departure_prob[k]``.
    """

    K: int
    M: int
    mean_rate: tuple[float, ...]
    capacity: tuple[float, ...]
    unit_power_cost: tuple[float, ...]
    arrival_prob: float
    type_prob: tuple[float, ...]
    departure_prob: tuple[float, ...]
    discount: float

    def __post_init__(self):
        object.__setattr__(self, "mean_rate", tuple(self.mean_rate))
        object.__setattr__(self, "capacity", tuple(self.capacity))
        object.__setattr__(self, "unit_power_cost", tuple(self.unit_power_cost))
        object.__setattr__(self, "type_prob", tuple(self.type_prob))
        object.__setattr__(self, "departure_prob", tuple(self.departure_prob))
        self._validate()

    def _validate(self):
        if self.K < 1:
            raise ConfigError("K: must be a positive integer")
        if self.M < 1:
            raise ConfigError("M: must be a positive integer")
        for key, arr, n in (
            ("mean_rate", self.mean_rate, self.M),
            ("capacity", self.capacity, self.K),
            ("unit_power_cost", self.unit_power_cost, self.K),
            ("type_prob", self.type_prob, self.M),
            ("departure_prob", self.departure_prob, self.K),
        ):
            if len(arr) != n:
                raise ConfigError(f"{key}: expected length {n}, got {len(arr)}")
        if any(r <= 0 for r in self.mean_rate):
            raise ConfigError("mean_rate: rates must be positive")
        for m in range(self.M - 1):
            if not self.mean_rate[m] < self.mean_rate[m + 1]:
                raise ConfigError(
                    "mean_rate: must be strictly increasing in the type index"
                )
        for k in range(self.K):
            if not self.capacity[k] > self.mean_rate[0]:
                raise ConfigError(
                    f"capacity: capacity[{k + 1}] must exceed the smallest flow "
                    "rate, otherwise no flow is ever admissible"
                )
        if any(c < 0 for c in self.unit_power_cost):
            raise ConfigError("unit_power_cost: costs must be nonnegative")
        if not 0.0 <= self.arrival_prob <= 1.0:
            raise ConfigError("arrival_prob: must lie in [0, 1]")
        if any(not 0.0 <= b <= 1.0 for b in self.type_prob):
            raise ConfigError("type_prob: entries must lie in [0, 1]")
        if abs(sum(self.type_prob) - 1.0) > _PROB_TOL:
            raise ConfigError("type_prob: entries must sum to 1")
        if any(not 0.0 <= q <= 1.0 for q in self.departure_prob):
            raise ConfigError("departure_prob: entries must lie in [0, 1]")
        if not 0.0 < self.discount < 1.0:
            raise ConfigError("discount: must lie strictly inside (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {
            "K", "M", "mean_rate", "capacity", "unit_power_cost",
            "arrival_prob", "type_prob", "departure_prob", "discount",
        }
        extra = set(d) - known
        if extra:
            raise ConfigError(f"{sorted(extra)[0]}: unknown configuration key")
        missing = known - set(d)
        if missing:
            raise ConfigError(f"{sorted(missing)[0]}: missing configuration key")
        return cls(**d)

    @classmethod
    def from_toml(cls, path) -> "ModelConfig":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        return cls.from_dict(data)

    def config_hash(self) -> str:
        """Short stable digest used to stamp derived artifacts (CSV headers)."""
        blob = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def reference_config() -> ModelConfig:
    """The 5-UPF, 2-type benchmark instance used throughout the experiments."""
    return ModelConfig(
        K=5,
        M=2,
        mean_rate=(30, 35),
        capacity=(100, 100, 100, 100, 100),
        unit_power_cost=(5, 4, 3, 2, 1),
        arrival_prob=0.7,
        type_prob=(0.6, 0.4),
        departure_prob=(0.3, 0.3, 0.3, 0.3, 0.3),
        discount=0.96,
    )
