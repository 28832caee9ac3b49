"""Shared reference-resolution objects; built once per test session."""
import numpy as np
import pytest

from wkam.mather import build_polytope, peierls_barrier, solve_mather_lp
from wkam.model import discounted_linear, frozen, pendulum
from wkam.solver import SchemeParams
from wkam.torus_grid import Grid, VelocityGrid

REF_PPU = 256


@pytest.fixture(scope="session")
def sp():
    return SchemeParams()


@pytest.fixture(scope="session")
def grid1():
    return Grid(1.0, REF_PPU)


@pytest.fixture(scope="session")
def coarse_sp():
    return SchemeParams(tau=0.02, vgrid=VelocityGrid(3.0, 61))


@pytest.fixture(scope="session")
def poly1(grid1, sp):
    return build_polytope(None, grid1, sp.vgrid, sp.tau)


@pytest.fixture(scope="session")
def pendulum_lp(poly1):
    return solve_mather_lp(poly1, pendulum(1))


@pytest.fixture(scope="session")
def linear_lp(poly1):
    return solve_mather_lp(poly1, frozen(discounted_linear(1), 0.0))


@pytest.fixture(scope="session")
def pendulum_barrier(grid1, sp):
    """Rows for sources 0, 1/4 and 1/2 of the pendulum barrier."""
    return peierls_barrier(pendulum(1), [0, 64, 128], sp=sp, grid=grid1, c=1.0)


def mane(x):
    """Closed-form Mane potential (2/pi)(1 - |cos pi x|) of the pendulum."""
    return 2.0 / np.pi * (1.0 - np.abs(np.cos(np.pi * np.asarray(x))))
