"""Closed occupation measures, Mather LPs, the Peierls barrier and the u0 selection.

Variables of every LP here are the weights mu(x_i, v_j) of an
``OccupationMeasure``, flattened row-major (node-major) from a
(points, velocities) table with velocities in ascending order.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sps

from .lp import InfeasibleError, LPError, solve_lp
from .measure import OccupationMeasure
from .model import Model, frozen, partial_L_u0
from .solver import SchemeParams, action_iterates, apply_operator, lagrangian_table, stencil
from .torus_grid import Grid, GridFunction, VelocityGrid

logger = logging.getLogger(__name__)

CONSTRAINT_TOL = 1e-9


class L4Error(ValueError):
    """The selection formula is undefined: (L4) does not hold on the optimal face."""


class LimInfWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# polytope


@dataclass(frozen=True, eq=False)
class ClosedMeasurePolytope:
    """Closed probability measures on the (node, velocity) grid.

    ``closure`` has one row per node i: the change of the hat function
    phi_i under the transport x -> x - tau v, divided by tau.
    """

    grid: Grid
    vgrid: VelocityGrid
    tau: float
    closure: sps.csr_matrix = field(repr=False)

    @property
    def shape(self) -> tuple:
        return (self.grid.points, self.vgrid.count)

    @property
    def nvars(self) -> int:
        return self.grid.points * self.vgrid.count

    def equalities(self):
        """(A_eq, b_eq): closure rows followed by the mass row."""
        A = sps.vstack([self.closure, sps.csr_matrix(np.ones((1, self.nvars)))], format="csr")
        b = np.zeros(self.grid.points + 1)
        b[-1] = 1.0
        return A, b

    def violation(self, weights) -> float:
        """Largest constraint violation of a weight table (any sign, mass included)."""
        w = np.asarray(weights, dtype=float).ravel()
        closure = np.abs(self.closure @ w).max(initial=0.0)
        return float(max(closure, abs(w.sum() - 1.0), max(0.0, -w.min())))

    def table(self, fn) -> np.ndarray:
        """Evaluate ``fn(x, v)`` on the variable grid, shape (points, count)."""
        x = self.grid.nodes[:, None]
        v = self.vgrid.velocities[None, :]
        return np.asarray(fn(x, v), dtype=float) * np.ones(self.shape)

    def measure(self, x, **meta) -> OccupationMeasure:
        w = np.maximum(np.asarray(x, dtype=float), 0.0).reshape(self.shape)
        return OccupationMeasure.normalized(self.grid, self.vgrid, w, **meta)


def build_polytope(m_r: Model | None, grid: Grid, vgrid: VelocityGrid,
                   tau: float) -> ClosedMeasurePolytope:
    """Sparse closure rows from the scheme's own interpolation stencil.

    ``m_r`` is accepted for symmetry with the LP calls; the polytope itself
    does not depend on the Lagrangian.
    """
    if tau * vgrid.vmax > grid.period / 2:
        raise ValueError(f"tau*vmax = {tau * vgrid.vmax} exceeds half the period")
    st = stencil(grid, vgrid, tau)
    n, nv = grid.points, vgrid.count
    # stencil position k holds natural velocity index st.order[k]
    cols = np.arange(n)[None, :] * nv + st.order[:, None]
    rows = np.concatenate([st.ia.ravel(), st.ib.ravel(), np.tile(np.arange(n), nv)])
    colsf = np.concatenate([cols.ravel(), cols.ravel(), cols.ravel()])
    vals = np.concatenate([np.repeat(st.wa, n), np.repeat(st.wb, n), -np.ones(n * nv)]) / tau
    A = sps.csr_matrix((vals, (rows, colsf)), shape=(n, n * nv))
    A.sum_duplicates()
    A.data[np.abs(A.data) < 1e-14] = 0.0
    A.eliminate_zeros()
    return ClosedMeasurePolytope(grid, vgrid, float(tau), A)


# ---------------------------------------------------------------------------
# LPs


@dataclass(frozen=True, eq=False)
class MatherResult:
    """Optimal value and vertex of the Mather LP; unpacks as ``(value, mu)``."""

    value: float
    mu: OccupationMeasure
    cost: np.ndarray = field(repr=False)  # L^r on the variable grid
    reduced_costs: np.ndarray = field(repr=False)  # same shape; >= 0 up to round-off
    backend: str = "highs"

    def __iter__(self):
        yield self.value
        yield self.mu

    def near_face(self, tol: float) -> np.ndarray:
        """Mask of variables whose reduced cost is at most ``tol``.

        A face measure (objective within ``face_tol`` of the optimum) puts
        total mass at most face_tol / tol outside this mask.
        """
        return self.reduced_costs <= tol


def _lagrangian_on(p: ClosedMeasurePolytope, m_r: Model) -> np.ndarray:
    return p.table(lambda x, v: m_r.L(x, v, 0.0))


def solve_mather_lp(p: ClosedMeasurePolytope, m_r: Model, backend: str = "highs") -> MatherResult:
    """Minimize sum mu * L^r over the closed-measure polytope."""
    cost = _lagrangian_on(p, m_r)
    A, b = p.equalities()
    try:
        res = solve_lp(cost.ravel(), A, b, backend=backend)
    except InfeasibleError as exc:
        raise LPError(f"internal error: closed-measure polytope reported infeasible ({exc})") from exc
    mu = p.measure(res.x, source="mather_lp", model=m_r.label)
    _check_emitted(p, mu)
    rc = res.reduced_costs(cost.ravel(), A).reshape(p.shape)
    return MatherResult(float(res.fun), mu, cost, rc, res.backend)


def _check_emitted(p, mu: OccupationMeasure):
    viol = p.violation(mu.weights)
    if viol > CONSTRAINT_TOL:
        raise LPError(f"emitted measure violates the polytope constraints by {viol:.3e}")


def default_face_tol(lp_value: float) -> float:
    return 1e-7 * (1.0 + abs(lp_value))


def optimal_face_optimize(p: ClosedMeasurePolytope, m_r: Model, lp_value: float, objective,
                          sense: str = "min", face_tol: float | None = None,
                          backend: str = "highs"):
    """Optimize a secondary linear objective over the (relaxed) optimal face.

    Args:
        objective: (points, count) table, or a callable ``f(x, v)``.
        sense: "min" or "max".
        face_tol: slack on the Mather value; defaults to 1e-7 (1 + |lp_value|).

    Returns:
        (value, mu) for the optimizer.
    """
    if sense not in ("min", "max"):
        raise ValueError("sense must be 'min' or 'max'")
    face_tol = default_face_tol(lp_value) if face_tol is None else float(face_tol)
    obj = p.table(objective) if callable(objective) else np.asarray(objective, dtype=float)
    if obj.shape != p.shape:
        raise ValueError(f"objective must have shape {p.shape}")
    cost = _lagrangian_on(p, m_r)
    A, b = p.equalities()
    sign = 1.0 if sense == "min" else -1.0
    try:
        res = solve_lp(sign * obj.ravel(), A, b, A_ub=cost.reshape(1, -1),
                       b_ub=np.array([lp_value + face_tol]), backend=backend)
    except InfeasibleError as exc:
        raise InfeasibleError(f"optimal face is empty at face_tol={face_tol:g}: {exc}") from exc
    mu = p.measure(res.x, source="optimal_face", sense=sense)
    _check_emitted(p, mu)
    return sign * float(res.fun), mu


# ---------------------------------------------------------------------------
# (L4)


@dataclass(frozen=True)
class L4Report:
    mather_optimum: float
    face_max_dLdu: float
    verdict: str  # holds | fails | marginal
    margin: float = 1e-3

    @property
    def lp_value(self) -> float:
        return self.mather_optimum

    def to_json(self, path=None) -> str:
        text = json.dumps({"lp_value": self.mather_optimum, "face_max_dLdu": self.face_max_dLdu,
                           "verdict": self.verdict}, indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text


def dLdu_table(p: ClosedMeasurePolytope, m: Model) -> np.ndarray:
    return p.table(lambda x, v: partial_L_u0(m, x, v))


def check_L4(m: Model, p: ClosedMeasurePolytope, lp: MatherResult | None = None,
             margin: float = 1e-3, face_tol: float | None = None) -> L4Report:
    """Largest value of the integral of dL/du(., ., 0) over the optimal face.

    "holds" when it is at most -margin; "fails" when it is nonnegative up to
    the face tolerance (some Mather measure has zero or positive weight);
    "marginal" in between.
    """
    if lp is None:
        lp = solve_mather_lp(p, frozen(m, 0.0))
    face_tol = default_face_tol(lp.value) if face_tol is None else face_tol
    fmax, _ = optimal_face_optimize(p, frozen(m, 0.0), lp.value, dLdu_table(p, m), "max",
                                    face_tol)
    fmax += 0.0  # no -0.0 in reports
    if fmax <= -margin:
        verdict = "holds"
    elif fmax >= -max(1e-6, 10 * face_tol):
        verdict = "fails"
    else:
        verdict = "marginal"
    return L4Report(lp.value, fmax, verdict, margin)


# ---------------------------------------------------------------------------
# Peierls barrier


@dataclass(frozen=True, eq=False)
class BarrierTable:
    grid: Grid
    sources: np.ndarray  # node indices
    values: np.ndarray = field(repr=False)  # (len(sources), points)
    T1: float = 20.0
    T2: float = 40.0
    tau: float = 0.01
    c: float = 0.0
    residuals: np.ndarray = field(default=None, repr=False)  # per-source fixed-point residual
    oscillation: np.ndarray = field(default=None, repr=False)  # max - min over the window
    flagged: bool = False

    def row(self, source: int) -> np.ndarray:
        hits = np.nonzero(self.sources == source % self.grid.points)[0]
        if hits.size == 0:
            raise KeyError(f"node {source} is not a barrier source")
        return self.values[hits[0]]

    def h(self, source: int, target) -> float:
        return self.row(source)[np.asarray(target) % self.grid.points]

    def as_function(self, source: int) -> GridFunction:
        return GridFunction(self.grid, self.row(source))

    def diagonal(self) -> np.ndarray:
        return self.values[np.arange(self.sources.size), self.sources]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["source", "target", "h"])
        xs = self.grid.nodes
        for s, row in zip(self.sources, self.values):
            for t, val in enumerate(row):
                writer.writerow([repr(float(xs[s])), repr(float(xs[t])), repr(float(val))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def peierls_barrier(m_0: Model, sources, T1: float = 20.0, T2: float = 40.0,
                    sp: SchemeParams = SchemeParams(), grid: Grid | None = None,
                    c: float | None = None, osc_tol: float | None = None) -> BarrierTable:
    """Windowed-minimum approximation of h(x, y) = liminf_t h_t(x, y).

    Args:
        m_0: u-independent Lagrangian (the model frozen at u = 0).
        sources: source node indices x.
        T1, T2: window [T1, T2] of horizons; both multiples of tau.
        c: critical value; computed by the Mather LP when omitted.
        osc_tol: the window oscillation flagged beyond 10 * osc_tol; defaults
            to the scheme tolerance.

    Returns:
        BarrierTable with h(x, .) for each source.
    """
    if grid is None:
        raise ValueError("a grid is required")
    if not 0 < T1 < T2:
        raise ValueError("need 0 < T1 < T2")
    k1, k2 = int(round(T1 / sp.tau)), int(round(T2 / sp.tau))
    for T, k in ((T1, k1), (T2, k2)):
        if abs(k * sp.tau - T) > 1e-9 * T:
            raise ValueError(f"horizon {T} is not a multiple of tau = {sp.tau}")
    if c is None:
        p = build_polytope(m_0, grid, sp.vgrid, sp.tau)
        c = -solve_mather_lp(p, m_0).value
    src = np.atleast_1d(np.asarray(sources, dtype=int)) % grid.points
    _, lo, hi = action_iterates(m_0, c, src, k2, sp, grid, window=(k1, k2))
    osc = hi - lo
    # fixed-point residual of each row under the one-step operator
    st = stencil(grid, sp.vgrid, sp.tau)
    Ltab = lagrangian_table(m_0, grid, st)
    Th, _ = apply_operator(lo, st, Ltab, c, sp.tau, want_argmin=False)
    residuals = np.max(np.abs(Th - lo), axis=-1)
    limit = 10 * (sp.tol if osc_tol is None else osc_tol)
    flagged = bool(osc.max() > limit)
    if flagged:
        warnings.warn(f"liminf window too small: oscillation {osc.max():.3e} over "
                      f"[{T1}, {T2}] exceeds {limit:.1e}", LimInfWarning, stacklevel=2)
    return BarrierTable(grid, src, lo, float(T1), float(T2), sp.tau, float(c), residuals, osc,
                        flagged)


def aubry_set(bt: BarrierTable, tol: float = 1e-2) -> np.ndarray:
    """Source nodes x with h(x, x) <= tol."""
    return bt.sources[bt.diagonal() <= tol]


# ---------------------------------------------------------------------------
# selection of the vanishing-discount limit


def _face_candidates(lp: MatherResult, face_tol: float, rc_tol: float):
    mask = lp.near_face(rc_tol)
    if not mask.any():
        raise LPError("no variable has a small reduced cost; duals are inconsistent")
    leak = face_tol / rc_tol
    return mask, leak


def face_support_nodes(lp: MatherResult, rc_tol: float = 1e-4) -> np.ndarray:
    """Nodes carrying variables that a near-optimal measure may charge."""
    return np.nonzero(lp.near_face(rc_tol).any(axis=1))[0]


def select_u0(m: Model, bt: BarrierTable, p: ClosedMeasurePolytope, lp: MatherResult,
              sp: SchemeParams | None = None, face_tol: float | None = None,
              rc_tol: float = 1e-4, l4: L4Report | None = None,
              backend: str = "highs") -> GridFunction:
    """u0(x) = inf over the optimal face of  int h(y, x) dL/du dmu / int dL/du dmu.

    The fractional program is turned into one LP per node x by the
    Charnes-Cooper substitution nu = t mu with int dL/du dnu = -1.  The
    variables are restricted to those with reduced cost <= ``rc_tol`` in the
    Mather LP; every face measure puts mass at most face_tol / rc_tol
    elsewhere.  ``bt`` must hold a row for every node of that set.

    Raises:
        L4Error: when (L4) does not hold, since the denominator can vanish.
    """
    if l4 is None:
        l4 = check_L4(m, p, lp, face_tol=face_tol)
    if l4.verdict != "holds":
        raise L4Error(f"(L4) {l4.verdict} (face max of dL/du = {l4.face_max_dLdu:.3e}); "
                      "the selection formula needs a strictly negative denominator")
    if bt.grid != p.grid:
        raise ValueError("barrier table and polytope use different grids")
    face_tol = default_face_tol(lp.value) if face_tol is None else face_tol
    mask, _ = _face_candidates(lp, face_tol, rc_tol)
    ii, jj = np.nonzero(mask)
    missing = sorted(set(ii.tolist()) - set(bt.sources.tolist()))
    if missing:
        raise ValueError(f"barrier table lacks sources for face nodes {missing[:10]}"
                         f"{' ...' if len(missing) > 10 else ''}")
    a = dLdu_table(p, m)[ii, jj]
    Lc = lp.cost[ii, jj]
    nsel = ii.size
    cols = ii * p.vgrid.count + jj
    closure = p.closure[:, cols]
    keep_rows = np.unique(closure.nonzero()[0])
    closure = closure[keep_rows]
    # variables: nu (nsel), t
    zcol = sps.csr_matrix((closure.shape[0], 1))
    A_eq = sps.vstack([
        sps.hstack([closure, zcol]),
        sps.csr_matrix(np.concatenate([np.ones(nsel), [-1.0]])[None, :]),
        sps.csr_matrix(np.concatenate([a, [0.0]])[None, :]),
    ], format="csr")
    b_eq = np.concatenate([np.zeros(closure.shape[0]), [0.0, -1.0]])
    A_ub = sps.csr_matrix(np.concatenate([Lc, [-(lp.value + face_tol)]])[None, :])
    b_ub = np.zeros(1)
    hsrc = np.stack([bt.row(i) for i in ii])  # (nsel, points): h(y_k, x)
    out = np.empty(p.grid.points)
    for x in range(p.grid.points):
        obj = np.concatenate([-(hsrc[:, x] * a), [0.0]])
        res = solve_lp(obj, A_eq, b_eq, A_ub, b_ub, backend=backend)
        out[x] = res.fun
    return GridFunction(p.grid, out)


@dataclass(frozen=True)
class SubsolutionReport:
    worst_domination_slack: float
    subsolution: bool
    face_min: float
    constraint: bool
    shifted_face_min: float
    shifted_violates: bool
    maximality_gap: float
    maximal: bool
    tol: float
    delta: float

    @property
    def largest(self) -> bool:
        return self.subsolution and self.constraint and self.maximal and self.shifted_violates

    def summary(self) -> dict:
        d = dict(self.__dict__)
        d["largest"] = self.largest
        return d


def verify_largest_subsolution(u0: GridFunction, m: Model, p: ClosedMeasurePolytope,
                               lp: MatherResult, bt: BarrierTable, sp: SchemeParams,
                               delta: float = 0.05, tol: float = 1e-6,
                               face_tol: float | None = None,
                               reference: GridFunction | None = None) -> SubsolutionReport:
    """Report-only checks that ``u0`` is the largest constrained subsolution.

    (i) one-step domination: T u0 - u0 >= -tol at every node (critical
    Lagrangian of the model frozen at 0); (ii) min over the optimal face of
    int u0 dL/du dmu >= -tol; (iii) u0 + delta violates (ii), and u0 is not
    below the h-generated test subsolutions on the barrier sources:
    u0(y) >= reference(y) - tol there, ``reference`` defaulting to the
    selection formula.
    """
    if u0.grid != p.grid:
        raise ValueError("u0 and polytope use different grids")
    grid = u0.grid
    m0 = frozen(m, 0.0)
    st = stencil(grid, sp.vgrid, sp.tau)
    Tu, _ = apply_operator(u0.values, st, lagrangian_table(m0, grid, st), -lp.value, sp.tau,
                           want_argmin=False)
    slack = float(np.min(Tu - u0.values))
    d = dLdu_table(p, m)
    weights = u0.values[:, None] * d
    fmin, _ = optimal_face_optimize(p, m0, lp.value, weights, "min", face_tol)
    fmin_shift, _ = optimal_face_optimize(p, m0, lp.value, weights + delta * d, "min", face_tol)
    if reference is None:
        reference = select_u0(m, bt, p, lp, sp, face_tol)
    src = bt.sources
    gap = float(np.min(u0.values[src] - reference.values[src]))
    return SubsolutionReport(slack, slack >= -tol, fmin, fmin >= -tol, fmin_shift,
                             fmin_shift < -tol, gap, gap >= -tol, tol, delta)
