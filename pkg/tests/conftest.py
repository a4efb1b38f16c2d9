import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from scalarfield import grid as G
from scalarfield import pohozaev as P

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(".", 1)[0].split()[-1])):
            terminalreporter.write_line(line)


# Gaussian moments in R^N: int e^{-|x|^2} = pi^{N/2}, int |x|^2 e^{-|x|^2} = (N/2) pi^{N/2}
def gausson_dirichlet(N):
    return math.e ** (N - 1) * (N / 2) * math.pi ** (N / 2)


def gausson_mass(N):
    return math.e ** (N - 1) * math.pi ** (N / 2)


def gausson_int_G(N):
    # int u^2 log u = (N-1)/2 mass - (1/2) int r^2 u^2 = ((N-1)/2 - N/4) mass
    return ((N - 1) / 2 - N / 4) * gausson_mass(N)


@pytest.fixture(scope="session")
def grid3():
    return G.build_radial_grid(3, 12.0, 8192)


@pytest.fixture(scope="session")
def grid3_coarse():
    return G.build_radial_grid(3, 12.0, 2048)


@pytest.fixture(scope="session")
def gausson3(grid3):
    return G.sample(grid3, P.gausson(3))


def unit_mass(u):
    return u * (1.0 / math.sqrt(G.integrate(u, np.square)))
