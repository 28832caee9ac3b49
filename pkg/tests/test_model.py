import numpy as np
import pytest

from wkam.model import (ConditionWarning, FenchelBudgetError, Verdict, alpha_coupled,
                        check_conditions, default_alpha, discounted_linear, fenchel_lagrangian,
                        free, from_hamiltonian, model_zoo, partial_L_u0, pendulum,
                        scale_coupling, shifted)


def _numeric(m):
    """Same Hamiltonian, Lagrangian from the Fenchel transform."""
    return from_hamiltonian(m.hamiltonian, m.period, label=m.label + "/numeric")


def test_fenchel_pendulum_example():
    m = _numeric(pendulum(1))
    assert m.L(0.0, 1.0, 0.0) == pytest.approx(-0.5, abs=1e-9)


def test_fenchel_at_zero_velocity_is_minus_H():
    m = _numeric(discounted_linear(1))
    x = np.linspace(0, 1, 7)
    assert np.allclose(m.L(x, 0.0, 0.3), -m.H(x, 0.0, 0.3), atol=1e-9)


def test_fenchel_alpha_coupled_example():
    # L(1, 0, 2) = -(H0(1, 0) + alpha(1) * 2) with H0(1, 0) = cos(2 pi) = 1
    m = _numeric(alpha_coupled(4))
    assert m.L(1.0, 0.0, 2.0) == pytest.approx(-3.0, abs=1e-9)


def test_fenchel_budget():
    m = _numeric(pendulum(1))
    with pytest.raises(FenchelBudgetError, match="superlinearity budget exceeded"):
        fenchel_lagrangian(m, 0.0, 20.0, 0.0)


@pytest.mark.parametrize("make", [pendulum, discounted_linear, lambda: alpha_coupled(4)])
def test_fenchel_round_trip(make):
    m = make()
    rng = np.random.default_rng(1)
    x = rng.uniform(0, m.period, 20)
    p = rng.uniform(-3, 3, 20)
    u = rng.uniform(-1, 1, 20)
    v = np.linspace(-8, 8, 3201)
    L = fenchel_lagrangian(m, x[:, None], v[None, :], u[:, None])
    back = np.max(p[:, None] * v[None, :] - L, axis=1)
    assert np.allclose(back, m.H(x, p, u), atol=1e-3)
    # analytic and numeric Lagrangians agree
    assert np.allclose(L, m.L(x[:, None], v[None, :], u[:, None]), atol=1e-6)


def test_partial_L_u0_examples():
    x = np.linspace(0, 4, 33)
    v = np.linspace(-2, 2, 33)
    assert np.allclose(partial_L_u0(alpha_coupled(4), x, v), -default_alpha(4)(x))
    assert np.all(partial_L_u0(discounted_linear(1), x, v) == -1.0)
    assert np.all(partial_L_u0(pendulum(1), x, v) == 0.0)
    fd = partial_L_u0(_numeric(discounted_linear(1)), x % 1, v)
    assert np.allclose(fd, -1.0, atol=1e-6)


def test_partial_L_u0_flags_positive_derivative():
    m = from_hamiltonian(lambda x, p, u: 0.5 * p * p - u, 1.0, label="bad")
    with pytest.warns(ConditionWarning, match="not non-increasing"):
        val = partial_L_u0(m, 0.3, 0.1)
    assert val == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("make", [pendulum, discounted_linear, lambda: alpha_coupled(4)])
def test_affine_models_exact_in_u(make):
    m = make()
    x = np.linspace(0, m.period, 17)[:, None]
    v = np.linspace(-3, 3, 13)[None, :]
    for u in (-1.5, 0.25, 2.0):
        assert np.allclose(m.L(x, v, u) - m.L(x, v, 0.0), u * partial_L_u0(m, x, v),
                           rtol=0, atol=1e-14)


def test_zoo_examples():
    assert model_zoo("pendulum", n=1).H(0.25, 1.0, 0.0) == pytest.approx(0.5)
    a = default_alpha(4)
    assert a(1.0) == 1.0 and a(2.0) == 0.0
    assert a(0.5) == pytest.approx(0.0, abs=1e-15) and a(5.0) == 1.0
    s = model_zoo("shifted", base={"name": "discounted_linear", "n": 1}, c0=-1.0)
    x = np.linspace(0, 1, 9)
    assert np.allclose(s.H(x, 0.0, 0.0), np.cos(2 * np.pi * x) - 1.0)
    assert model_zoo("alpha_coupled", n=4).period == 4.0
    with pytest.raises(ValueError, match="unknown model"):
        model_zoo("nope")


def test_scale_coupling_keeps_L0():
    m = alpha_coupled(4, offset=0.2)
    k = scale_coupling(m, 3.0)
    x, v = np.linspace(0, 4, 9), 0.7
    assert np.allclose(k.L(x, v, 0.0), m.L(x, v, 0.0))
    assert np.allclose(partial_L_u0(k, x, v), 3 * partial_L_u0(m, x, v))
    with pytest.raises(ValueError):
        scale_coupling(m, 0.0)


def test_conditions_pendulum():
    rep = check_conditions(pendulum(1))
    assert rep.passed
    assert "== 0" in rep["L3"].note


def test_conditions_alpha_coupled():
    rep = check_conditions(alpha_coupled(4))
    for name in ("L0", "L1", "L2", "L3", "L5"):
        assert rep[name].status == "pass", name


def test_conditions_L0_violation_has_witness():
    rep = check_conditions(free(1, coupling=-1.0))  # H = p^2/2 - u
    v = rep["L0"]
    assert v.status == "fail"
    assert v.witness is not None and len(v.witness) == 3
    assert v.magnitude > 0
    with pytest.raises(ValueError):
        Verdict("L0", "fail")


def test_conditions_numeric_model_matches_analytic():
    rep = check_conditions(_numeric(alpha_coupled(4)))
    assert all(rep[k].status == "pass" for k in ("L0", "L1", "L2", "L5"))
