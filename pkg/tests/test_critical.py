import numpy as np
import pytest

from wkam.critical import (CriticalValue, TrendWarning, critical_csv, critical_value,
                           critical_value_ergodic, critical_value_lp, find_c0)
from wkam.mather import build_polytope, solve_mather_lp
from wkam.model import discounted_linear, free, frozen, from_hamiltonian, pendulum
from wkam.solver import SchemeParams
from wkam.torus_grid import Grid, VelocityGrid

SP = SchemeParams(tau=0.02, vgrid=VelocityGrid(3.0, 61))
G = Grid(1.0, 64)


@pytest.fixture(scope="module")
def poly():
    return build_polytope(None, G, SP.vgrid, SP.tau)


def test_lp_pendulum(poly):
    cv = critical_value_lp(pendulum(1), poly)
    assert cv.value == pytest.approx(1.0, abs=1e-9)
    assert cv.method == "lp" and cv.points == 64
    assert cv.error <= 1e-9


def test_lp_equals_minus_mather_value(poly):
    m = frozen(discounted_linear(1), 0.3)
    assert critical_value_lp(m, poly).value == -solve_mather_lp(poly, m).value


def test_free_is_zero(poly):
    assert critical_value_lp(free(1), poly).value == 0.0
    assert critical_value_ergodic(free(1), SP, G).value == pytest.approx(0.0, abs=1e-9)


def test_ergodic_pendulum():
    cv = critical_value_ergodic(pendulum(1), SP, G)
    assert cv.value == pytest.approx(1.0, abs=1e-2)
    assert len(cv.samples) == 3 and cv.flags == ()
    assert cv.error < 1e-2


def test_ergodic_validation():
    with pytest.raises(ValueError, match="u-independent"):
        critical_value_ergodic(discounted_linear(1), SP, G)
    with pytest.raises(ValueError, match="decreasing"):
        critical_value_ergodic(pendulum(1), SP, G, ladder=(1e-3, 1e-2))


def test_ergodic_flags_nonmonotone_trend(monkeypatch):
    import wkam.critical as crit
    from types import SimpleNamespace
    from wkam.torus_grid import GridFunction

    # -lambda * u = 1.0, 1.1, 1.0 across the ladder
    fake = {1e-2: 1.0, 5e-3: 1.1, 2.5e-3: 1.0}
    monkeypatch.setattr(crit, "solve_discounted", lambda m, lam, c, sp, init: SimpleNamespace(
        u=GridFunction.constant(init.grid, -fake[lam] / lam)))
    with pytest.warns(TrendWarning, match="non-monotone"):
        cv = critical_value_ergodic(pendulum(1), SP, G)
    assert cv.flags == ("non-monotone lambda trend",)


@pytest.mark.parametrize("r", [-0.5, 0.0, 0.7])
def test_frozen_shift(r, poly):
    m = discounted_linear(1)
    assert critical_value(m, r, "lp", SP, G, poly) == pytest.approx(1.0 + r, abs=1e-12)
    assert critical_value(m, r, "ergodic", SP, G) == pytest.approx(1.0 + r, abs=1e-2)


def test_monotone_in_r(poly):
    m = discounted_linear(1)
    rs = np.linspace(-2, 2, 9)
    cs = [critical_value(m, r, "lp", SP, G, poly) for r in rs]
    assert np.all(np.diff(cs) >= 0)


def test_additive_constant_exact(poly):
    base = pendulum(1)
    plus = from_hamiltonian(lambda x, p, u: base.H(x, p, u) + 0.25, 1.0)
    plus = frozen(plus, 0.0)
    # analytic Lagrangian of the shifted model
    from dataclasses import replace
    plus = replace(plus, lagrangian=lambda x, v, u: base.L(x, v, u) - 0.25)
    assert critical_value_lp(plus, poly).value == critical_value_lp(base, poly).value + 0.25


def test_find_c0_examples():
    r = find_c0(discounted_linear(1), sp=SP, grid=G)
    assert r == pytest.approx(-1.0, abs=2e-2)
    assert abs(r + 1.0) < 1e-8
    assert find_c0(free(1, coupling=1.0), sp=SP, grid=G) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValueError, match="bracket invalid"):
        find_c0(discounted_linear(1), bracket=(0.0, 1.0), sp=SP, grid=G)
    with pytest.raises(ValueError, match="bracket invalid"):
        find_c0(discounted_linear(1), bracket=(1.0, 0.0), sp=SP, grid=G)


def test_unknown_method():
    with pytest.raises(ValueError):
        critical_value(pendulum(1), 0.0, "magic", SP, G)


def test_csv_rows():
    cv = CriticalValue(1.0, "lp", 0.0, 64, 1.0, 0.02, 61)
    text = critical_csv([("pendulum(1)", cv)])
    assert text == "model,method,value,error\npendulum(1),lp,1.0,0.0\n"
