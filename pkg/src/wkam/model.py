"""Hamiltonian/Lagrangian pairs H(x, p, u), L(x, v, u) on the circle R/nZ.

Zoo models carry closed-form Lagrangians.  Models built from a bare
Hamiltonian get their Lagrangian from a discrete Fenchel transform over a
momentum grid (``fenchel_lagrangian``).

All callables broadcast over numpy arrays.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .torus_grid import VelocityGrid

TWO_PI = 2.0 * np.pi
FD_STEP = 1e-5
DEFAULT_PGRID = VelocityGrid(12.0, 961)


class FenchelBudgetError(ValueError):
    """The maximizing momentum sits on the edge of the momentum grid."""


class ConditionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Model:
    period: float
    hamiltonian: Callable
    lagrangian: Callable | None = None
    dLdu0: Callable | None = None
    # full u-derivative of L, used to linearize the discounted scheme
    dLdu: Callable | None = None
    label: str = ""
    claims: frozenset = frozenset()
    u_independent: bool = False
    pgrid: VelocityGrid = DEFAULT_PGRID
    meta: dict = field(default_factory=dict, compare=False)

    def H(self, x, p, u=0.0):
        return self.hamiltonian(x, p, u)

    def L(self, x, v, u=0.0):
        if self.lagrangian is not None:
            return self.lagrangian(x, v, u)
        return fenchel_lagrangian(self, x, v, u, self.pgrid)

    def L_u(self, x, v, u):
        """dL/du at (x, v, u)."""
        if self.u_independent:
            return np.zeros(np.broadcast(x, v, u).shape)
        if self.dLdu is not None:
            return np.broadcast_to(self.dLdu(x, v, u), np.broadcast(x, v, u).shape)
        return (self.L(x, v, u + FD_STEP) - self.L(x, v, u - FD_STEP)) / (2 * FD_STEP)


def fenchel_lagrangian(m: Model, x, v, u, pgrid: VelocityGrid = DEFAULT_PGRID):
    """L(x, v, u) = sup_p p*v - H(x, p, u), evaluated on a momentum grid.

    The discrete maximum is refined by the vertex of the parabola through the
    argmax and its two neighbours.  Raises ``FenchelBudgetError`` when the
    argmax lies on the grid boundary, i.e. the momentum box is too small for
    the requested velocity.
    """
    x, v, u = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, v, u)))
    p = pgrid.velocities
    vals = p * v[..., None] - m.H(x[..., None], p, u[..., None])
    k = np.argmax(vals, axis=-1)
    if np.any((k == 0) | (k == p.size - 1)):
        raise FenchelBudgetError(
            f"superlinearity budget exceeded: |p| <= {pgrid.vmax} does not "
            f"contain the maximizer for |v| up to {np.max(np.abs(v)):.4g}")
    f0 = np.take_along_axis(vals, k[..., None], -1)[..., 0]
    fm = np.take_along_axis(vals, k[..., None] - 1, -1)[..., 0]
    fp = np.take_along_axis(vals, k[..., None] + 1, -1)[..., 0]
    curv = 2 * f0 - fm - fp
    with np.errstate(divide="ignore", invalid="ignore"):
        bump = np.where(curv > 0, (fp - fm) ** 2 / (8 * curv), 0.0)
    out = f0 + bump
    return float(out) if out.ndim == 0 else out


def partial_L_u0(m: Model, x, v):
    """dL/du(x, v, 0): analytic when the model has it, else a central difference."""
    if m.dLdu0 is not None:
        return np.broadcast_to(m.dLdu0(x, v), np.broadcast(x, v).shape) * 1.0
    if m.u_independent:
        return np.zeros(np.broadcast(x, v).shape)
    val = (m.L(x, v, FD_STEP) - m.L(x, v, -FD_STEP)) / (2 * FD_STEP)
    if np.any(val > 1e-8):
        warnings.warn(
            f"{m.label}: finite-difference dL/du(.,.,0) is positive "
            f"(max {np.max(val):.3g}); L is not non-increasing in u",
            ConditionWarning, stacklevel=2)
    return val


# ---------------------------------------------------------------------------
# zoo


def _pendulum_H0(x, p):
    return 0.5 * p * p + np.cos(TWO_PI * x)


def _pendulum_L0(x, v):
    return 0.5 * v * v - np.cos(TWO_PI * x)


def default_alpha(n: int, offset: float = 0.0) -> Callable:
    """n-periodic bump cos^2(pi x) on [1/2, 3/2], zero on the rest of [0, n)."""
    if n < 2:
        raise ValueError("the alpha bump needs period n >= 2")

    def alpha(x):
        y = np.mod(x, n)
        bump = np.where((y >= 0.5) & (y <= 1.5), np.cos(np.pi * y) ** 2, 0.0)
        return bump + offset

    return alpha


def affine_coupled(period, H0, L0, a, label, claims=frozenset()) -> Model:
    """H = H0(x, p) + a(x) u, hence L = L0(x, v) - a(x) u and dL/du = -a(x)."""

    def H(x, p, u):
        return H0(x, p) + a(x) * u

    def L(x, v, u):
        return L0(x, v) - a(x) * u

    def dLdu(x, v, u):
        return -a(x) + 0.0 * v

    return Model(period=float(period), hamiltonian=H, lagrangian=L,
                 dLdu0=lambda x, v: dLdu(x, v, 0.0), dLdu=dLdu,
                 label=label, claims=frozenset(claims))


def pendulum(n: int = 1) -> Model:
    return Model(
        period=float(n),
        hamiltonian=lambda x, p, u: _pendulum_H0(x, p) + 0.0 * u,
        lagrangian=lambda x, v, u: _pendulum_L0(x, v) + 0.0 * u,
        dLdu0=lambda x, v: 0.0 * (x + v),
        label=f"pendulum({n})",
        claims=frozenset({"L0", "L1", "L2", "L3", "L5"}),
        u_independent=True,
    )


def discounted_linear(n: int = 1) -> Model:
    return affine_coupled(n, _pendulum_H0, _pendulum_L0, lambda x: 1.0 + 0.0 * x,
                          f"discounted_linear({n})",
                          {"L0", "L1", "L2", "L3", "L4", "L5"})


def alpha_coupled(n: int = 4, offset: float = 0.0, alpha: Callable | None = None) -> Model:
    a = alpha if alpha is not None else default_alpha(n, offset)
    claims = {"L0", "L1", "L2", "L3", "L5"} | ({"L4"} if offset > 0 else set())
    label = f"alpha_coupled({n})" + (f"+{offset:g}" if offset else "")
    return affine_coupled(n, _pendulum_H0, _pendulum_L0, a, label, claims)


def free(n: int = 1, coupling: float = 0.0) -> Model:
    """H = p^2/2 + coupling * u.  A negative coupling breaks monotonicity in u."""
    k = float(coupling)
    claims = {"L1", "L2", "L3", "L5"} | ({"L0"} if k >= 0 else set())
    m = affine_coupled(n, lambda x, p: 0.5 * p * p + 0.0 * x,
                       lambda x, v: 0.5 * v * v + 0.0 * x,
                       lambda x: k + 0.0 * x, f"free({n}, coupling={k:g})", claims)
    return replace(m, u_independent=(k == 0.0))


def shifted(base: Model, c0: float) -> Model:
    """H~(x, p, u) = H(x, p, c0 + u)."""
    def dLdu(x, v, u):
        return base.L_u(x, v, c0 + u)

    return Model(
        period=base.period,
        hamiltonian=lambda x, p, u: base.H(x, p, c0 + u),
        lagrangian=lambda x, v, u: base.L(x, v, c0 + u),
        dLdu0=lambda x, v: dLdu(x, v, 0.0),
        dLdu=dLdu,
        label=f"shifted({base.label}, c0={c0:g})",
        claims=base.claims,
        u_independent=base.u_independent,
        pgrid=base.pgrid,
    )


def frozen(base: Model, r: float) -> Model:
    """The u-independent pair H^r(x, p) = H(x, p, r), L^r(x, v) = L(x, v, r)."""
    return Model(
        period=base.period,
        hamiltonian=lambda x, p, u: base.H(x, p, r + 0.0 * u),
        lagrangian=lambda x, v, u: base.L(x, v, r + 0.0 * u),
        dLdu0=lambda x, v: 0.0 * (x + v),
        label=f"{base.label}@u={r:g}",
        claims=base.claims,
        u_independent=True,
        pgrid=base.pgrid,
        meta={"base": base, "r": r},
    )


def linear_discount(base: Model) -> Model:
    """H(x, p, u) = base.H(x, p, 0) + u: the classical lambda u + G(x, du) = 0 form."""
    return Model(
        period=base.period,
        hamiltonian=lambda x, p, u: base.H(x, p, 0.0 * u) + u,
        lagrangian=lambda x, v, u: base.L(x, v, 0.0 * u) - u,
        dLdu0=lambda x, v: -1.0 + 0.0 * (x + v),
        dLdu=lambda x, v, u: -1.0 + 0.0 * (x + v + u),
        label=f"linear_discount({base.label})",
        claims=base.claims | {"L0", "L4", "L5"},
        pgrid=base.pgrid,
    )


def scale_coupling(base: Model, k: float) -> Model:
    """L(x, v, k u): multiplies dL/du(., ., 0) by k > 0 and leaves L^0 unchanged."""
    if not k > 0:
        raise ValueError("coupling scale must be positive")
    d0 = (lambda x, v: k * base.dLdu0(x, v)) if base.dLdu0 is not None else None
    return Model(
        period=base.period,
        hamiltonian=lambda x, p, u: base.H(x, p, k * u),
        lagrangian=lambda x, v, u: base.L(x, v, k * u),
        dLdu0=d0,
        dLdu=lambda x, v, u: k * base.L_u(x, v, k * u),
        label=f"{base.label}*{k:g}",
        claims=base.claims,
        u_independent=base.u_independent,
        pgrid=base.pgrid,
    )


def from_hamiltonian(H: Callable, period: float, label: str = "custom",
                     pgrid: VelocityGrid = DEFAULT_PGRID) -> Model:
    """User Hamiltonian; the Lagrangian comes from the numeric Fenchel transform."""
    return Model(period=float(period), hamiltonian=H, label=label, pgrid=pgrid)


_ZOO = {
    "pendulum": pendulum,
    "discounted_linear": discounted_linear,
    "alpha_coupled": alpha_coupled,
    "free": free,
}


def model_zoo(name: str, **params) -> Model:
    """Look up a model by name.

    ``shifted`` takes ``base`` (a Model or a ``{"name": ..., **params}`` dict)
    and ``c0``.
    """
    if name == "shifted":
        base = params["base"]
        if isinstance(base, dict):
            base = dict(base)
            base = model_zoo(base.pop("name"), **base)
        return shifted(base, float(params["c0"]))
    try:
        factory = _ZOO[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; known: {sorted(_ZOO) + ['shifted']}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# condition probes


@dataclass(frozen=True)
class SamplingSpec:
    nx: int = 33
    vmax: float = 3.0
    nv: int = 25
    umax: float = 2.0
    nu: int = 9
    pmax: float = 8.0
    tol: float = 1e-9
    l3_tol: float = 1e-2


@dataclass(frozen=True)
class Verdict:
    condition: str
    status: str  # pass | fail | unknown
    magnitude: float = 0.0
    witness: tuple | None = None
    note: str = ""

    def __post_init__(self):
        if self.status == "fail" and self.witness is None:
            raise ValueError("a failing verdict needs a witness sample")


@dataclass(frozen=True)
class ConditionReport:
    label: str
    verdicts: dict

    def __getitem__(self, key) -> Verdict:
        return self.verdicts[key]

    @property
    def passed(self) -> bool:
        return all(v.status == "pass" for v in self.verdicts.values())

    def summary(self) -> dict:
        return {k: {"status": v.status, "magnitude": v.magnitude,
                    "witness": v.witness, "note": v.note}
                for k, v in self.verdicts.items()}


def _worst(excess, *axes_values):
    """(magnitude, witness) of the largest positive entry in ``excess``."""
    idx = np.unravel_index(np.argmax(excess), excess.shape)
    witness = tuple(float(ax[i]) for ax, i in zip(axes_values, idx))
    return float(excess[idx]), witness


def check_conditions(m: Model, samples: SamplingSpec = SamplingSpec()) -> ConditionReport:
    s = samples
    xs = np.linspace(0.0, m.period, s.nx, endpoint=False)
    vs = np.linspace(-s.vmax, s.vmax, s.nv)
    us = np.linspace(-s.umax, s.umax, s.nu)
    X, V, U = np.meshgrid(xs, vs, us, indexing="ij")
    verdicts = {}

    try:
        Lt = np.asarray(m.L(X, V, U), dtype=float)
    except FenchelBudgetError as exc:
        Lt = None
        for name in ("L0", "L1", "L3", "L5"):
            verdicts[name] = Verdict(name, "unknown", note=str(exc))

    if Lt is not None:
        # (L0) non-increasing in u
        rise = Lt[:, :, 1:] - Lt[:, :, :-1]
        mag, wit = _worst(rise, xs, vs, us)
        verdicts["L0"] = (Verdict("L0", "fail", mag, wit, "L increases in u")
                          if mag > s.tol else Verdict("L0", "pass", max(mag, 0.0)))

        # (L1) convex in v: second differences at several strides
        worst, wit = -np.inf, None
        for stride in (1, 2, 4):
            if 2 * stride >= s.nv:
                break
            d2 = Lt[:, 2 * stride:, :] - 2 * Lt[:, stride:-stride, :] + Lt[:, :-2 * stride, :]
            mag, w = _worst(-d2, xs, vs[stride:-stride], us)
            if mag > worst:
                worst, wit = mag, w
        verdicts["L1"] = (Verdict("L1", "fail", worst, wit, "midpoint convexity in v violated")
                          if worst > s.tol else Verdict("L1", "pass", max(worst, 0.0)))

        # (L5) concave in u
        if s.nu >= 3:
            d2u = Lt[:, :, 2:] - 2 * Lt[:, :, 1:-1] + Lt[:, :, :-2]
            mag, wit = _worst(d2u, xs, vs, us[1:-1])
            verdicts["L5"] = (Verdict("L5", "fail", mag, wit, "midpoint concavity in u violated")
                              if mag > s.tol else Verdict("L5", "pass", max(mag, 0.0)))

        # (L3) first-order expansion at u = 0
        X2, V2 = np.meshgrid(xs, vs, indexing="ij")
        d0 = partial_L_u0(m, X2, V2)
        L0v = m.L(X2, V2, 0.0)
        ratios = {}
        for du in (1e-2, 1e-3):
            r = np.maximum(np.abs(m.L(X2, V2, du) - L0v - du * d0),
                           np.abs(m.L(X2, V2, -du) - L0v + du * d0)) / du
            ratios[du] = r
        r_big, r_small = ratios[1e-2], ratios[1e-3]
        bad = np.maximum(r_small - r_big - s.tol, r_small - s.l3_tol)
        mag, wit = _worst(bad, xs, vs)
        note = "dL/du(.,.,0) == 0 on samples" if np.all(d0 == 0) else ""
        verdicts["L3"] = (Verdict("L3", "fail", mag, wit, "first-order remainder does not shrink")
                          if mag > 0 else Verdict("L3", "pass", float(r_small.max()), note=note))

    # (L2) via coercivity: for H convex in p, growth between the shells
    # |p| = P/2 and |p| = P along every ray forces H -> +inf.
    P = s.pmax
    Xh, Uh = np.meshgrid(xs, us, indexing="ij")
    h0 = m.H(Xh, 0.0, Uh)
    gaps = []
    for sign in (1.0, -1.0):
        hh = m.H(Xh, sign * P / 2, Uh)
        hf = m.H(Xh, sign * P, Uh)
        gaps.append(np.minimum(hf - hh, hh - h0))
    g = np.minimum(*gaps)
    mag, wit = _worst(-g, xs, us)
    verdicts["L2"] = (Verdict("L2", "fail", mag, wit, "H does not grow along a momentum ray")
                      if mag >= 0 else Verdict("L2", "pass", float(g.min()),
                                               note="coercivity proxy (H2')"))
    return ConditionReport(m.label, verdicts)
