import numpy as np
import pytest

from hetpower.config import ScenarioConfig
from hetpower.gain_matrix import LayeredGains
from hetpower.geometry import build_hex_layout, build_wrap_map
from hetpower.propagation import PropagationParams


@pytest.fixture(scope="session")
def params():
    return PropagationParams()


@pytest.fixture(scope="session")
def layout19():
    return build_hex_layout(19, 1.0)


@pytest.fixture(scope="session")
def wrap19(layout19):
    return build_wrap_map(layout19)


@pytest.fixture(scope="session")
def layout1():
    return build_hex_layout(1, 1.0)


@pytest.fixture(scope="session")
def wrap1(layout1):
    return build_wrap_map(layout1)


@pytest.fixture()
def config():
    return ScenarioConfig()


def random_gains(rng, n, layers=("macro", "micro"), diag_boost=10.0):
    """Random layered gains with dominant serving diagonals."""
    gains = {}
    for layer in layers:
        m = rng.uniform(0.01, 1.0, size=(n, n))
        m[np.diag_indices(n)] = rng.uniform(1.0, 2.0, size=n) * diag_boost
        gains[layer] = m
    return LayeredGains(
        gains=gains,
        targets=rng.uniform(0.5, 1.5, size=n),
        noise_W=rng.uniform(0.5, 1.5, size=n),
    )
