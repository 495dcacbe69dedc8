import numpy as np
import pytest

from flowalloc import CompiledModel, ModelConfig, reference_config
from flowalloc.dp import solve


@pytest.fixture(scope="session")
def cfg_ref():
    return reference_config()


@pytest.fixture(scope="session")
def cm_ref(cfg_ref):
    return CompiledModel(cfg_ref)


@pytest.fixture(scope="session")
def cfg_k2():
    return ModelConfig(
        K=2,
        M=2,
        mean_rate=(1, 2),
        capacity=(3, 4),
        unit_power_cost=(1.0, 2.0),
        arrival_prob=0.5,
        type_prob=(0.5, 0.5),
        departure_prob=(0.3, 0.5),
        discount=0.9,
    )


@pytest.fixture(scope="session")
def cm_k2(cfg_k2):
    return CompiledModel(cfg_k2)


@pytest.fixture(scope="session")
def cfg_k1():
    return ModelConfig(
        K=1,
        M=1,
        mean_rate=(1,),
        capacity=(2,),
        unit_power_cost=(1.0,),
        arrival_prob=0.5,
        type_prob=(1.0,),
        departure_prob=(0.5,),
        discount=0.9,
    )


@pytest.fixture(scope="session")
def cm_k1(cfg_k1):
    return CompiledModel(cfg_k1)


@pytest.fixture(scope="session")
def solved_k1(cm_k1):
    return solve(cm_k1, tol=1e-12, mode="pds")


@pytest.fixture(scope="session")
def solved_k2(cm_k2):
    return solve(cm_k2, tol=1e-10, mode="pds")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240824)
