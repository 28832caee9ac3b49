import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wkam.torus_grid import (Grid, GridFunction, VelocityGrid, interp, lipschitz_estimate,
                             make_grid, sup_dist)


def test_make_grid_spacing():
    assert make_grid(1.0, 8).spacing == 0.125
    assert make_grid(4.0, 256).spacing == 0.015625


@pytest.mark.parametrize("period,points", [(1.0, 4), (1.0, 7)])
def test_make_grid_rejects_few_points(period, points):
    with pytest.raises(ValueError, match="points too small"):
        make_grid(period, points)


@pytest.mark.parametrize("period", [0.0, -1.0])
def test_make_grid_rejects_bad_period(period):
    with pytest.raises(ValueError):
        make_grid(period, 16)


def test_nodes_and_wrap():
    g = make_grid(2.0, 10)
    assert g.node(3) == pytest.approx(0.6)
    assert g.node(13) == g.node(3)
    assert g.spacing * g.points == g.period
    assert g.index_of(1.99) == 0
    assert g.index_of(-0.2) == 9


def test_velocity_grid():
    vg = VelocityGrid(3.0, 121)
    v = vg.velocities
    assert v.size == 121 and v[60] == 0.0
    assert np.all(np.diff(v) > 0)
    assert v[0] == -3.0 and v[-1] == 3.0
    assert vg.step == pytest.approx(0.05)
    with pytest.raises(ValueError):
        VelocityGrid(3.0, 120)
    with pytest.raises(ValueError):
        VelocityGrid(0.0, 11)


def test_interp_examples():
    g = make_grid(1.0, 256)
    f = GridFunction.from_callable(g, lambda x: np.sin(2 * np.pi * x))
    assert interp(f, g.node(10)) == np.sin(2 * np.pi * g.node(10))
    assert interp(GridFunction.constant(g, 3.0), 0.123) == 3.0
    two = GridFunction(Grid(1.0, 2), [0.0, 1.0])
    assert interp(two, 0.25) == 0.5


def test_grid_function_is_immutable_and_finite():
    g = make_grid(1.0, 8)
    f = GridFunction.constant(g, 1.0)
    with pytest.raises(ValueError):
        f.values[0] = 2.0
    with pytest.raises(ValueError):
        GridFunction(g, [np.nan] + [0.0] * 7)
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros(9))


def test_sup_dist_examples():
    g = make_grid(1.0, 256)
    f = GridFunction.from_callable(g, lambda x: np.sin(2 * np.pi * x))
    assert sup_dist(f, f) == 0.0
    assert sup_dist(f, f + 2) == pytest.approx(2.0)
    assert sup_dist(f, -f) == pytest.approx(2 * np.abs(f.values).max())
    assert sup_dist(f, -f) == pytest.approx(2.0)
    with pytest.raises(ValueError, match="grid mismatch"):
        sup_dist(f, GridFunction.constant(make_grid(1.0, 128), 0.0))


def test_lipschitz_examples():
    g = make_grid(1.0, 256)
    assert lipschitz_estimate(GridFunction.constant(g, 5.0)) == 0.0
    ramp = GridFunction.from_callable(g, lambda x: x)
    # the wrap edge jumps from 1 - h back to 0
    assert lipschitz_estimate(ramp) == pytest.approx((g.points - 1) * g.spacing / g.spacing)
    v1 = GridFunction.from_callable(g, lambda x: 2 / np.pi * (1 - np.abs(np.cos(np.pi * x))))
    assert lipschitz_estimate(v1) == pytest.approx(2.0, abs=1e-3)


def test_csv_round_trip(tmp_path):
    g = make_grid(2.0, 16)
    f = GridFunction.from_callable(g, lambda x: np.cos(np.pi * x))
    text = f.to_csv(tmp_path / "f.csv")
    assert text.splitlines()[0] == "x,value"
    back = GridFunction.from_csv(tmp_path / "f.csv", period=2.0)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)
    assert np.array_equal(GridFunction.from_csv(text, period=2.0).values, f.values)


values = st.lists(st.floats(-100, 100, allow_nan=False), min_size=8, max_size=40)


@given(values, st.floats(-50, 50, allow_nan=False))
def test_interp_exact_at_nodes_and_periodic(vals, x):
    g = make_grid(3.0, len(vals))
    f = GridFunction(g, vals)
    for i in range(g.points):
        assert interp(f, g.node(i)) == f.values[i]
    assert interp(f, x) == pytest.approx(interp(f, x + g.period), abs=1e-9)
    assert abs(interp(f, x)) <= np.abs(f.values).max() + 1e-12


@settings(max_examples=50)
@given(st.integers(8, 30).flatmap(lambda n: st.tuples(*[st.lists(
    st.floats(-10, 10, allow_nan=False), min_size=n, max_size=n)] * 3)))
def test_sup_dist_triangle(triple):
    g = make_grid(1.0, len(triple[0]))
    f, h, k = (GridFunction(g, t) for t in triple)
    assert sup_dist(f, k) <= sup_dist(f, h) + sup_dist(h, k) + 1e-12
    assert sup_dist(f, h) == sup_dist(h, f)


@given(values, st.floats(-1e3, 1e3, allow_nan=False))
def test_lipschitz_shift_invariant(vals, c):
    f = GridFunction(make_grid(1.0, len(vals)), vals)
    assert lipschitz_estimate(f + c) == pytest.approx(lipschitz_estimate(f), rel=1e-9, abs=1e-6)
