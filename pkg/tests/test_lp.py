import numpy as np
import pytest
import scipy.sparse as sps

from wkam.lp import InfeasibleError, UnboundedError, bland_simplex, solve_lp


def _random_feasible(rng, m=6, n=14):
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(0.1, 1.0, n)
    c = rng.uniform(0.1, 2.0, n)  # positive costs keep it bounded on x >= 0
    return c, A, A @ x0


@pytest.mark.parametrize("seed", range(5))
def test_backends_agree(seed):
    c, A, b = _random_feasible(np.random.default_rng(seed))
    h = solve_lp(c, A, b, backend="highs")
    s = solve_lp(c, A, b, backend="simplex")
    assert h.fun == pytest.approx(s.fun, rel=1e-9, abs=1e-9)
    for r in (h, s):
        assert np.allclose(A @ r.x, b, atol=1e-9)
        assert np.all(r.x >= -1e-12)
        rc = r.reduced_costs(c, A)
        assert rc.min() >= -1e-7
        # complementary slackness
        assert np.max(np.abs(rc * r.x)) <= 1e-7


def test_inequality_rows():
    # min -x - y  s.t. x + 2y <= 4, 3x + y <= 6
    c = [-1.0, -1.0]
    A_ub = [[1.0, 2.0], [3.0, 1.0]]
    for backend in ("highs", "simplex"):
        r = solve_lp(c, None, None, A_ub, [4.0, 6.0], backend=backend)
        assert r.fun == pytest.approx(-2.8)
        assert np.allclose(r.x, [1.6, 1.2])
        assert np.allclose(r.y_ub, [-0.4, -0.2])


def test_beale_cycling_example_terminates():
    # Beale's example cycles under the textbook largest-coefficient rule
    c = np.array([-0.75, 150.0, -0.02, 6.0])
    A_ub = np.array([[0.25, -60.0, -0.04, 9.0],
                     [0.5, -90.0, -0.02, 3.0],
                     [0.0, 0.0, 1.0, 0.0]])
    b_ub = np.array([0.0, 0.0, 1.0])
    r = bland_simplex(c, None, None, A_ub, b_ub)
    assert r.fun == pytest.approx(-0.05)
    assert np.allclose(r.x, [0.04, 0.0, 1.0, 0.0])


def test_redundant_equalities():
    A = np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
    r = bland_simplex([1.0, 2.0, 3.0], A, [1.0, 2.0])
    assert r.fun == pytest.approx(1.0)
    assert np.allclose(r.x, [1.0, 0.0, 0.0])


def test_negative_rhs_handled():
    r = bland_simplex([1.0, 1.0], [[-1.0, -1.0]], [-2.0])
    assert r.fun == pytest.approx(2.0)


@pytest.mark.parametrize("backend", ["highs", "simplex"])
def test_infeasible(backend):
    A = [[1.0, 1.0], [1.0, 1.0]]
    with pytest.raises(InfeasibleError):
        solve_lp([1.0, 1.0], A, [1.0, 2.0], backend=backend)


@pytest.mark.parametrize("backend", ["highs", "simplex"])
def test_unbounded(backend):
    with pytest.raises(UnboundedError):
        solve_lp([-1.0, 0.0], [[0.0, 1.0]], [1.0], backend=backend)


def test_sparse_input_and_unknown_backend():
    c, A, b = _random_feasible(np.random.default_rng(9))
    r = solve_lp(c, sps.csr_matrix(A), b, backend="simplex")
    assert np.allclose(A @ r.x, b)
    with pytest.raises(ValueError, match="unknown LP backend"):
        solve_lp(c, A, b, backend="glpk")
