import numpy as np
import pytest

from duvio import kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # one-time jit compile so timed tests measure compute, not compilation
    kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
