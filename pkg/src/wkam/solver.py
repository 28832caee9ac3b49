"""Semi-Lagrangian Lax-Oleinik machinery on the circle.

One step of the scheme reads

    (T f)(x) = min_v  f(x - tau v) + tau * (L(x, v, w(x)) + c)

where ``f`` is linearly interpolated, ``v`` runs over a symmetric velocity
grid and ``w`` is a frozen discount field (``lambda * u`` inside the
fixed-point solver).  Fixed points of ``u -> T[lambda u](u)`` are the
discrete solutions of H(x, u', lambda u) = c.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .measure import OccupationMeasure
from .model import Model, partial_L_u0
from .torus_grid import Grid, GridFunction, VelocityGrid, interp_values

logger = logging.getLogger(__name__)

BIG = 1e6


class SolverError(RuntimeError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SchemeParams:
    tau: float = 0.01
    vgrid: VelocityGrid = VelocityGrid(3.0, 121)
    tol: float = 1e-9
    max_iter: int = 20000
    damping: float = 1.0
    # "newton": policy-linearized steps with pseudo-time damping;
    # "iterate": plain damped fixed-point iteration
    method: str = "newton"

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.method not in ("newton", "iterate"):
            raise ValueError(f"unknown method {self.method!r}")

    def check(self, grid: Grid):
        if self.tau * self.vgrid.vmax > grid.period / 2:
            raise ValueError(
                f"tau*vmax = {self.tau * self.vgrid.vmax} exceeds half the period {grid.period / 2}")


@dataclass(frozen=True, eq=False)
class Stencil:
    """Interpolation data for the departure points x_i - tau v.

    Velocities are stored ordered by (|v|, v) so that ``argmin`` picks the
    smallest speed, then the negative one, on ties.
    """

    vel: np.ndarray
    order: np.ndarray
    ia: np.ndarray
    ib: np.ndarray
    wa: np.ndarray
    wb: np.ndarray


@lru_cache(maxsize=64)
def stencil(grid: Grid, vgrid: VelocityGrid, tau: float) -> Stencil:
    v = vgrid.velocities
    order = np.lexsort((v, np.abs(v)))
    vel = v[order]
    shift = tau * vel / grid.spacing
    k = np.floor(shift)
    theta = shift - k
    near = np.abs(theta - np.rint(theta)) < 1e-12
    k = np.where(near & (np.rint(theta) == 1), k + 1, k)
    theta = np.where(near, 0.0, theta)
    i = np.arange(grid.points)
    ia = (i[None, :] - k[:, None].astype(int)) % grid.points
    ib = (ia - 1) % grid.points
    return Stencil(vel, order, ia, ib, 1.0 - theta, theta)


def lagrangian_table(m: Model, grid: Grid, st: Stencil, field_vals=None) -> np.ndarray:
    """L(x_i, v_j, w(x_i)) as a (velocities, points) table in stencil order."""
    w = 0.0 if field_vals is None else np.asarray(field_vals)[None, :]
    return np.asarray(m.L(grid.nodes[None, :], st.vel[:, None], w), dtype=float) * np.ones(
        (st.vel.size, grid.points))


def apply_operator(f: np.ndarray, st: Stencil, Ltab: np.ndarray, c: float, tau: float,
                   want_argmin: bool = True):
    """Raw one-step operator on node values; ``f`` may carry leading batch axes.

    Returns the new values and the argmin velocity index (stencil order),
    the latter being None when ``want_argmin`` is false.
    """
    return _apply_cost(f, st, tau * (Ltab + c), want_argmin)


def _apply_cost(f, st, cost, want_argmin=True):
    f = np.asarray(f, dtype=float)
    if f.ndim > 1:
        # one row at a time: a 2-D gather per row is much faster than a 3-D one
        flat = f.reshape(-1, f.shape[-1])
        outs = [_apply_cost(row, st, cost, want_argmin) for row in flat]
        vals = np.stack([o[0] for o in outs]).reshape(f.shape)
        if not want_argmin:
            return vals, None
        return vals, np.stack([o[1] for o in outs]).reshape(f.shape)
    cand = f[st.ia]
    cand *= st.wa[:, None]
    other = f[st.ib]
    other *= st.wb[:, None]
    cand += other
    cand += cost
    if not want_argmin:
        return cand.min(axis=0), None
    j = np.argmin(cand, axis=0)
    return cand[j, np.arange(f.size)], j


def lax_oleinik_step(m: Model, discount_field: GridFunction, f: GridFunction, c: float,
                     sp: SchemeParams) -> GridFunction:
    if discount_field.grid != f.grid:
        raise ValueError("discount_field and f live on different grids")
    grid = f.grid
    sp.check(grid)
    st = stencil(grid, sp.vgrid, sp.tau)
    Ltab = lagrangian_table(m, grid, st, discount_field.values)
    out, _ = apply_operator(f.values, st, Ltab, c, sp.tau)
    return GridFunction(grid, out)


# ---------------------------------------------------------------------------
# discounted fixed point


@dataclass(frozen=True, eq=False)
class DiscountedSolution:
    lam: float
    c: float
    u: GridFunction
    iterations: int
    residual: float
    anchor: tuple | None = None
    method: str = "newton"
    history: tuple = field(default=(), repr=False)

    def summary(self) -> dict:
        return {"lambda": self.lam, "c": self.c, "residual": self.residual,
                "iterations": self.iterations}

    def to_csv(self, path=None) -> str:
        text = "x,u\n" + "".join(f"{x!r},{v!r}\n" for x, v in
                                  zip(self.u.grid.nodes.tolist(), self.u.values.tolist()))
        if path is not None:
            path = Path(path)
            path.write_text(text)
            path.with_suffix(".json").write_text(json.dumps(self.summary(), indent=2))
        return text


class _FixedPointMap:
    """u -> T[lam u](u), optionally renormalized so that u(anchor) stays put."""

    def __init__(self, m, grid, lam, c, sp, anchor):
        self.m, self.grid, self.lam, self.c, self.sp = m, grid, lam, c, sp
        self.st = stencil(grid, sp.vgrid, sp.tau)
        self.anchor = anchor
        self.frozen = m.u_independent or lam == 0
        self._L0 = lagrangian_table(m, grid, self.st) if self.frozen else None

    def table(self, u):
        if self.frozen:
            return self._L0
        return lagrangian_table(self.m, self.grid, self.st, self.lam * u)

    def __call__(self, u):
        Tu, j = apply_operator(u, self.st, self.table(u), self.c, self.sp.tau)
        if self.anchor is not None:
            a, val = self.anchor
            Tu = Tu - Tu[a] + val
        return Tu, j

    def jacobian(self, u, j):
        n = self.grid.points
        rows = np.arange(n)
        cols_a = self.st.ia[j, rows]
        cols_b = self.st.ib[j, rows]
        P = sps.csr_matrix(
            (np.concatenate([self.st.wa[j], self.st.wb[j]]),
             (np.concatenate([rows, rows]), np.concatenate([cols_a, cols_b]))),
            shape=(n, n))
        if not self.frozen:
            du = self.m.L_u(self.grid.nodes, self.st.vel[j], self.lam * u)
            P = P + sps.diags(self.sp.tau * self.lam * np.asarray(du, dtype=float))
        if self.anchor is not None:
            P = P.toarray()
            P = P - P[self.anchor[0]][None, :]
        return P


def _newton_update(J, G, dt):
    n = G.size
    if sps.issparse(J):
        A = sps.identity(n, format="csc") * (1.0 + 1.0 / dt) - J.tocsc()
        return spla.spsolve(A, G)
    A = np.eye(n) * (1.0 + 1.0 / dt) - J
    return scipy.linalg.solve(A, G)


def solve_discounted(m: Model, lam: float, c: float, sp: SchemeParams, init: GridFunction,
                     anchor=None) -> DiscountedSolution:
    """Fixed point of u -> T[lam u](u) starting from ``init``.

    ``anchor`` (required when ``lam == 0``) is a node index, or a pair
    ``(node, value)``; the iterate is renormalized so that u(node) = value.

    With ``sp.method == "iterate"`` this is the damped iteration
    u <- (1 - d) u + d T[lam u](u), the damping halving whenever the residual
    grows.  The default ``"newton"`` method linearizes the scheme around the
    current argmin policy and takes implicit pseudo-time steps whose length
    grows as the residual falls; both stop on the same residual test.
    """
    if lam < 0:
        raise ValueError("discount factor must be >= 0")
    grid = init.grid
    sp.check(grid)
    if abs(m.period - grid.period) > 1e-12 * grid.period:
        raise ValueError(f"model period {m.period} does not match grid period {grid.period}")
    if lam == 0:
        if anchor is None:
            raise SolverError("unanchored critical solve: lambda = 0 needs an anchor node")
        if np.ndim(anchor) == 0:
            anchor = (int(anchor), float(init.values[int(anchor)]))
        anchor = (int(anchor[0]) % grid.points, float(anchor[1]))
    else:
        anchor = None

    F = _FixedPointMap(m, grid, lam, c, sp, anchor)
    u = np.array(init.values, dtype=float)
    if anchor is not None:
        u = u - u[anchor[0]] + anchor[1]
    history = []
    if sp.method == "iterate":
        u, it, res = _iterate(F, u, sp, history)
    else:
        u, it, res = _newton(F, u, sp, history)
    if res > sp.tol:
        raise SolverError(f"max_iter exceeded ({it} iterations, residual {res:.3e})",
                          residual=res, iterations=it)
    return DiscountedSolution(lam, c, GridFunction(grid, u), it, res, anchor, sp.method,
                              tuple(history))


def _iterate(F, u, sp, history):
    d = sp.damping
    res_prev = np.inf
    for it in range(sp.max_iter + 1):
        Tu, _ = F(u)
        res = float(np.max(np.abs(Tu - u)))
        history.append(res)
        if res <= sp.tol or it == sp.max_iter:
            return u, it, res
        if res > res_prev:
            d *= 0.5
        res_prev = res
        u = (1.0 - d) * u + d * Tu
    return u, it, res


def _newton(F, u, sp, history, dt=10.0, dt_max=1e14):
    Tu, j = F(u)
    res = float(np.max(np.abs(Tu - u)))
    for it in range(sp.max_iter + 1):
        history.append(res)
        if res <= sp.tol or it == sp.max_iter:
            return u, it, res
        G = Tu - u
        delta = _newton_update(F.jacobian(u, j), G, dt)
        trial = u + delta
        Tt, jt = F(trial)
        res_t = float(np.max(np.abs(Tt - trial)))
        if not np.isfinite(res_t) or res_t > 2.0 * res:
            # reject: fall back to a shorter pseudo-time step
            dt = max(dt * 0.1, 1e-3)
            if dt <= 1e-3:
                u = u + sp.damping * G
                Tu, j = F(u)
                res = float(np.max(np.abs(Tu - u)))
            continue
        dt = min(dt * max(res / max(res_t, 1e-300), 2.0), dt_max)
        u, Tu, j, res = trial, Tt, jt, res_t
    return u, it, res


def equibounded_band(u_hat: GridFunction, eps: float = 0.0):
    """Pointwise band [u_hat - max u_hat - eps, u_hat - min u_hat + eps]."""
    v = u_hat.values
    return v - v.max() - eps, v - v.min() + eps


# ---------------------------------------------------------------------------
# finite horizon action


def action_iterates(m_r: Model, c: float, sources, steps: int, sp: SchemeParams, grid: Grid,
                    big: float = BIG, window: tuple | None = None):
    """Batched DP for h_t(source, .), t = k tau.

    Returns the final iterate (sources x points); with ``window=(k1, k2)``
    also the running min and max over iterates k1..k2.
    """
    sp.check(grid)
    st = stencil(grid, sp.vgrid, sp.tau)
    Ltab = lagrangian_table(m_r, grid, st)
    src = np.atleast_1d(np.asarray(sources, dtype=int)) % grid.points
    cost = sp.tau * (Ltab + c)
    h = np.full((src.size, grid.points), big)
    h[np.arange(src.size), src] = 0.0
    lo = hi = None
    for k in range(1, steps + 1):
        h, _ = _apply_cost(h, st, cost, want_argmin=False)
        if window is not None and window[0] <= k <= window[1]:
            lo = h.copy() if lo is None else np.minimum(lo, h)
            hi = h.copy() if hi is None else np.maximum(hi, h)
    return h, lo, hi


def finite_horizon_action(m_r: Model, x_source: int, T: float, sp: SchemeParams, grid: Grid,
                          c: float = 0.0, big: float = BIG) -> list:
    """All iterates h_0, h_tau, ..., h_T of the action from node ``x_source``.

    ``c`` is the critical value added to the Lagrangian.
    """
    steps = int(round(T / sp.tau))
    if abs(steps * sp.tau - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"horizon {T} is not a multiple of tau = {sp.tau}")
    if steps * sp.tau * (np.max(np.abs(lagrangian_table(m_r, grid, stencil(
            grid, sp.vgrid, sp.tau)))) + abs(c)) >= big:
        raise ValueError("BIG is not larger than the reachable action at this horizon")
    st = stencil(grid, sp.vgrid, sp.tau)
    Ltab = lagrangian_table(m_r, grid, st)
    h = np.full(grid.points, big)
    h[x_source % grid.points] = 0.0
    cost = sp.tau * (Ltab + c)
    out = [GridFunction(grid, h)]
    for _ in range(steps):
        h, _ = _apply_cost(h, st, cost, want_argmin=False)
        out.append(GridFunction(grid, h))
    return out


# ---------------------------------------------------------------------------
# domination, calibration, occupation


@dataclass(frozen=True)
class DominationReport:
    worst_slack: float
    worst_rest_slack: float
    worst_curve_slack: float
    bound: float
    trials: int

    @property
    def ok(self) -> bool:
        return self.worst_slack >= -self.bound


def verify_domination(m: Model, sol: DiscountedSolution, trials: int, sp: SchemeParams,
                      seed: int = 0, max_segments: int = 6, max_steps: int = 40) -> DominationReport:
    """Check u(x_K) - E u(x_0) <= sum tau (L + c) along random discrete curves.

    A discrete curve is a node x_K together with a sequence of grid
    velocities; going backwards, each step moves the position distribution
    by -tau v and splits mass between neighbouring nodes with the
    interpolation weights, so the inequality is the one the scheme itself
    certifies.  Curves are zig-zags of piecewise-constant velocity.
    """
    grid = sol.u.grid
    st = stencil(grid, sp.vgrid, sp.tau)
    u = sol.u.values
    Ltab = lagrangian_table(m, grid, st, None if (m.u_independent or sol.lam == 0)
                            else sol.lam * u)
    cost = sp.tau * (Ltab + sol.c)

    # rest curves: one step at v = 0 (stencil index 0)
    rest = cost[0] + u[st.ia[0]] * st.wa[0] + u[st.ib[0]] * st.wb[0] - u
    worst_rest = float(rest.min())

    rng = np.random.default_rng(seed)
    worst_curve = np.inf
    n = grid.points
    for _ in range(trials):
        start = rng.integers(n)
        dist = np.zeros(n)
        dist[start] = 1.0
        acc = 0.0
        for _seg in range(rng.integers(1, max_segments + 1)):
            jv = rng.integers(st.vel.size)
            for _k in range(rng.integers(1, max_steps + 1)):
                acc += float(dist @ cost[jv])
                new = np.zeros(n)
                np.add.at(new, st.ia[jv], dist * st.wa[jv])
                np.add.at(new, st.ib[jv], dist * st.wb[jv])
                dist = new
        slack = acc - (u[start] - float(dist @ u))
        worst_curve = min(worst_curve, slack)
    worst = min(worst_rest, worst_curve)
    bound = 1e-6 + 10 * sp.tol
    return DominationReport(worst, worst_rest, float(worst_curve), bound, trials)


@dataclass(frozen=True, eq=False)
class CalibratedPath:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    step_actions: np.ndarray
    defects: np.ndarray
    period: float

    @property
    def total_action(self) -> float:
        return float(self.step_actions.sum())

    def __len__(self):
        return self.times.size


def _one_step_at(u_vals, grid, m, x, sp, lam, c, vel):
    """Candidate values of the one-step operator at an arbitrary point x."""
    dep = interp_values(u_vals, grid, x - sp.tau * vel)
    w = 0.0 if lam == 0 else lam * float(interp_values(u_vals, grid, x))
    Lv = np.asarray(m.L(x, vel, w), dtype=float) * np.ones_like(vel)
    return dep + sp.tau * (Lv + c), Lv


def backtrack_calibrated(m: Model, sol: DiscountedSolution, x: int, steps: int,
                         sp: SchemeParams) -> CalibratedPath:
    """Greedy backward path from node ``x``: at each point take the argmin
    velocity of the one-step operator (ties: smaller |v|, then negative).

    Entry k describes the step arriving at position k: the curve passes
    through ``positions[k] - tau * velocities[k]`` one step earlier.
    ``defects`` holds |u(x_k) - u(x_k - tau v_k) - tau (L + c)| with u
    interpolated, which is at the scheme residual at nodes and at the
    interpolation consistency error elsewhere.
    """
    grid = sol.u.grid
    st = stencil(grid, sp.vgrid, sp.tau)
    u = sol.u.values
    pos = grid.node(x)
    times, xs, vs, acts, defs = [], [], [], [], []
    for k in range(steps):
        cand, Lv = _one_step_at(u, grid, m, pos, sp, sol.lam, sol.c, st.vel)
        j = int(np.argmin(cand))
        v = float(st.vel[j])
        step = sp.tau * (Lv[j] + sol.c)
        prev = float(np.mod(pos - sp.tau * v, grid.period))
        times.append(-k * sp.tau)
        xs.append(pos)
        vs.append(v)
        acts.append(step)
        defs.append(abs(float(interp_values(u, grid, pos)) - float(interp_values(u, grid, prev))
                        - step))
        pos = prev
    return CalibratedPath(np.array(times), np.array(xs), np.array(vs), np.array(acts),
                          np.array(defs), grid.period)


def build_discounted_occupation(m: Model, path: CalibratedPath, lam: float, grid: Grid,
                                vgrid: VelocityGrid, tau: float) -> OccupationMeasure:
    """Discrete analogue of the exponentially weighted occupation measure.

    Step k (k = 0 is the present) gets weight exp(lam * tau * sum_{j<k} dL/du(x_j, v_j, 0)),
    i.e. the u-derivative accumulated over the later part of the path.
    """
    if len(path) == 0:
        raise ValueError("empty path")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    d = np.asarray(partial_L_u0(m, path.positions, path.velocities), dtype=float)
    d = d * np.ones(len(path))
    later = np.concatenate([[0.0], np.cumsum(d)[:-1]])
    expo = lam * tau * later
    weights = np.exp(expo)
    if not np.any(weights > 0) or not np.isfinite(weights.sum()):
        raise ValueError("degenerate normalization: all occupation weights underflow")
    vel = vgrid.velocities
    table = np.zeros((grid.points, vgrid.count))
    s = np.mod(path.positions, grid.period) / grid.spacing
    i0 = np.floor(s).astype(int)
    theta = s - i0
    jv = np.argmin(np.abs(path.velocities[:, None] - vel[None, :]), axis=1)
    np.add.at(table, (i0 % grid.points, jv), weights * (1 - theta))
    np.add.at(table, ((i0 + 1) % grid.points, jv), weights * theta)
    return OccupationMeasure.normalized(grid, vgrid, table, source="discounted_occupation",
                                        lam=lam)
