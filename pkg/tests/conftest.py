import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from catsim import kernels
from catsim.states import CatQuditParams

settings.register_profile(
    "catsim",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("catsim")


@pytest.fixture
def params2():
    return CatQuditParams(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    previous = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


def random_ket_amp(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_rho(rng, n, rank=3):
    vs = rng.normal(size=(rank, n)) + 1j * rng.normal(size=(rank, n))
    w = rng.random(rank)
    rho = sum(wi * np.outer(v, v.conj()) for wi, v in zip(w, vs))
    return rho / np.trace(rho).real


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
