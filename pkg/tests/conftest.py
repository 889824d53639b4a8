import numpy as np
import pytest

from besov_lab.models.smoothness import BesovParams
from besov_lab.services.worker_pool import WorkerPool


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def params_2d() -> BesovParams:
    return BesovParams(beta=(1.0, 4.0), p=2.0, q=2.0, r=2.0, m=2)


@pytest.fixture(autouse=True)
def _serial_pool():
    WorkerPool.configure(1, quiet=True)
    yield
    WorkerPool.configure(1, quiet=False)
