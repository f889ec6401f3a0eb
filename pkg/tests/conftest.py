import numpy as np
import pytest

from mimosg.params import default_params


@pytest.fixture
def params_async():
    return default_params("async", m=64, eps=0.0)


@pytest.fixture
def params_async_pc():
    return default_params("async", m=64, eps=0.5)


@pytest.fixture
def params_sync():
    return default_params("sync", m=64, eps=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
