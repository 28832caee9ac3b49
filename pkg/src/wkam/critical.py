"""Critical values c(H^r) by the ergodic (vanishing discount) and LP routes,
and the shift c0 with c(H^{c0}) = 0.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .mather import ClosedMeasurePolytope, build_polytope, solve_mather_lp
from .model import Model, frozen, linear_discount
from .solver import SchemeParams, solve_discounted
from .torus_grid import Grid, GridFunction, make_grid

logger = logging.getLogger(__name__)

ERGODIC_LADDER = (1e-2, 5e-3, 2.5e-3)


class TrendWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CriticalValue:
    value: float
    method: str  # ergodic | lp
    error: float
    points: int
    period: float
    tau: float
    velocities: int
    flags: tuple = ()
    samples: tuple = field(default=(), repr=False)  # (lambda, -mean(lambda u_lambda)) pairs

    def csv_row(self, model: str) -> str:
        return f"{model},{self.method},{self.value!r},{self.error!r}\n"


def critical_csv(rows) -> str:
    """``rows`` is an iterable of (model label, CriticalValue)."""
    return "model,method,value,error\n" + "".join(cv.csv_row(name) for name, cv in rows)


def _default_grid(m: Model, grid: Grid | None, points_per_unit: int = 256) -> Grid:
    return grid if grid is not None else make_grid(m.period, int(round(points_per_unit * m.period)))


def critical_value_ergodic(m_r: Model, sp: SchemeParams = SchemeParams(), grid: Grid | None = None,
                           ladder=ERGODIC_LADDER) -> CriticalValue:
    """-lim lambda u_lambda for lambda u + H^r(x, u') = 0.

    The samples -mean(lambda u_lambda) are fitted by a polynomial in lambda
    of degree len(ladder) - 1 and evaluated at 0; the error is the distance
    between that value and the next lower-order extrapolation.

    Args:
        m_r: u-independent model (a model frozen at some r).
        ladder: strictly decreasing discount factors.
    """
    if not m_r.u_independent:
        raise ValueError("critical_value_ergodic needs a u-independent model; freeze it first")
    lams = np.asarray(ladder, dtype=float)
    if lams.size < 2 or np.any(np.diff(lams) >= 0) or np.any(lams <= 0):
        raise ValueError("ladder must hold at least two strictly decreasing positive values")
    grid = _default_grid(m_r, grid)
    wrapped = linear_discount(m_r)
    u = GridFunction.constant(grid, 0.0)
    cs = []
    for lam in lams:
        sol = solve_discounted(wrapped, float(lam), 0.0, sp, u)
        u = sol.u
        cs.append(-float(np.mean(lam * sol.u.values)))
    cs = np.array(cs)
    flags = ()
    steps = np.diff(cs)
    if np.any(steps > 0) and np.any(steps < 0):
        flags = ("non-monotone lambda trend",)
        warnings.warn(f"non-monotone lambda trend in {cs}", TrendWarning, stacklevel=2)
    k = lams.size - 1
    top = float(np.polyval(np.polyfit(lams, cs, k), 0.0))
    lower = float(np.polyval(np.polyfit(lams[1:], cs[1:], k - 1), 0.0))
    err = abs(top - lower)
    return CriticalValue(top, "ergodic", err, grid.points, grid.period, sp.tau, sp.vgrid.count,
                         flags, tuple(zip(lams.tolist(), cs.tolist())))


def critical_value_lp(m_r: Model, p: ClosedMeasurePolytope, coarse_check: bool = True,
                      backend: str = "highs") -> CriticalValue:
    """-(min of sum mu L^r over the closed-measure polytope).

    The error estimate is the change of the value when the polytope is
    rebuilt with half the points and twice the time step (skipped, and
    reported as 0, when that grid would be too small).
    """
    value = -solve_mather_lp(p, m_r, backend=backend).value + 0.0  # no -0.0
    err = 0.0
    if coarse_check and p.grid.points >= 16 and p.grid.points % 2 == 0:
        coarse = build_polytope(m_r, Grid(p.grid.period, p.grid.points // 2), p.vgrid, 2 * p.tau)
        if 2 * p.tau * p.vgrid.vmax <= p.grid.period / 2:
            err = abs(value + solve_mather_lp(coarse, m_r, backend=backend).value)
    return CriticalValue(value, "lp", err, p.grid.points, p.grid.period, p.tau, p.vgrid.count)


def critical_value(m: Model, r: float = 0.0, method: str = "lp", sp: SchemeParams = SchemeParams(),
                   grid: Grid | None = None, p: ClosedMeasurePolytope | None = None) -> float:
    """c(H^r) for the model frozen at u = r."""
    m_r = frozen(m, r)
    if method == "lp":
        if p is None:
            grid = _default_grid(m, grid)
            p = build_polytope(m_r, grid, sp.vgrid, sp.tau)
        return -solve_mather_lp(p, m_r).value
    if method == "ergodic":
        return critical_value_ergodic(m_r, sp, grid).value
    raise ValueError(f"unknown method {method!r}")


def find_c0(m: Model, bracket=(-10.0, 10.0), tol: float = 1e-9, method: str = "lp",
            sp: SchemeParams = SchemeParams(), grid: Grid | None = None,
            max_iter: int = 200) -> float:
    """Bisection for r with c(H^r) = 0.

    Args:
        bracket: (low, high) with c(H^low) < 0 < c(H^high).
        tol: stop once |c(H^r)| <= tol.

    Raises:
        ValueError: "bracket invalid" when the signs at the ends are wrong.
    """
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise ValueError(f"bracket invalid: need low < high, got {bracket}")
    p = None
    if method == "lp":
        grid = _default_grid(m, grid)
        p = build_polytope(m, grid, sp.vgrid, sp.tau)
    c_of = lambda r: critical_value(m, r, method, sp, grid, p)  # noqa: E731
    c_lo, c_hi = c_of(lo), c_of(hi)
    if not (c_lo < 0 < c_hi):
        raise ValueError(f"bracket invalid: c(H^{lo:g}) = {c_lo:.6g}, c(H^{hi:g}) = {c_hi:.6g}; "
                         "need opposite signs")
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        c_mid = c_of(mid)
        logger.debug("find_c0: r=%.12g c=%.3e", mid, c_mid)
        if abs(c_mid) <= tol or hi - lo <= 1e-14 * max(1.0, abs(mid)):
            return mid
        if c_mid < 0:
            lo = mid
        else:
            hi = mid
    return mid
