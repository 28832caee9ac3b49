"""Linear programs in the form  min c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0.

Two backends behind one call:

* ``"highs"`` -- scipy's HiGHS dual simplex; returns a vertex and the
  equality duals.  Used for the desk-scale occupation-measure polytopes.
* ``"simplex"`` -- a dense two-phase tableau simplex with Bland's rule.
  Deterministic and cycle-free; meant for small instances and as an
  independent cross-check of the HiGHS results.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from scipy.optimize import linprog


class LPError(RuntimeError):
    pass


class InfeasibleError(LPError):
    pass


class UnboundedError(LPError):
    pass


@dataclass(frozen=True, eq=False)
class LPResult:
    x: np.ndarray
    fun: float
    y_eq: np.ndarray  # duals of the equality rows: c - A_eq^T y_eq - A_ub^T y_ub >= 0
    y_ub: np.ndarray
    iterations: int
    backend: str

    def reduced_costs(self, c, A_eq, A_ub=None) -> np.ndarray:
        rc = np.asarray(c, dtype=float) - _T(A_eq) @ self.y_eq
        if A_ub is not None and self.y_ub.size:
            rc = rc - _T(A_ub) @ self.y_ub
        return np.asarray(rc).ravel()


def _T(A):
    return A.T if sps.issparse(A) else np.asarray(A).T


def solve_lp(c, A_eq, b_eq, A_ub=None, b_ub=None, backend: str = "highs") -> LPResult:
    if backend == "highs":
        return _highs(c, A_eq, b_eq, A_ub, b_ub)
    if backend == "simplex":
        dense = lambda A: None if A is None else (A.toarray() if sps.issparse(A) else np.asarray(A, float))
        return bland_simplex(c, dense(A_eq), b_eq, dense(A_ub), b_ub)
    raise ValueError(f"unknown LP backend {backend!r}")


def _highs(c, A_eq, b_eq, A_ub, b_ub) -> LPResult:
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs-ds", options={"primal_feasibility_tolerance": 1e-10,
                                              "dual_feasibility_tolerance": 1e-10})
    if res.status == 2:
        raise InfeasibleError(res.message)
    if res.status == 3:
        raise UnboundedError(res.message)
    if res.status != 0:
        raise LPError(res.message)
    y_ub = res.ineqlin.marginals if A_ub is not None else np.zeros(0)
    x = np.asarray(res.x)
    refined = refine_on_support(c, A_eq, b_eq, A_ub, b_ub, x, float(res.fun))
    if refined is not None:
        x = refined
    return LPResult(x, float(np.dot(c, x)), np.asarray(res.eqlin.marginals),
                    np.asarray(y_ub), int(res.nit), "highs")


def refine_on_support(c, A_eq, b_eq, A_ub, b_ub, x, fun, thresh: float = 1e-8,
                      max_cols: int = 1500):
    """Re-solve with the Bland simplex on the columns a HiGHS vertex charges.

    HiGHS returns degenerate vertices with ~1e-9 dust spread over many
    columns and residuals that its internal scaling hides.  Restricting to
    the columns above ``thresh`` gives a small dense LP whose vertex is
    exact to round-off.  The refined point is used only when its objective
    is within 1e-8 (1 + |fun|) of the HiGHS value.
    """
    S = np.nonzero(x > thresh)[0]
    if S.size == 0 or S.size > max_cols:
        return None
    Ad = bd = None
    if A_eq is not None:
        A = sps.csr_matrix(np.asarray(A_eq, float) if not sps.issparse(A_eq) else A_eq)[:, S]
        rows = np.unique(A.nonzero()[0])
        if np.any(np.abs(np.delete(np.asarray(b_eq, float), rows)) > 0):
            return None
        Ad, bd = A[rows].toarray(), np.asarray(b_eq, float)[rows]
    Ud = None if A_ub is None else (
        sps.csr_matrix(A_ub)[:, S].toarray() if sps.issparse(A_ub) else np.asarray(A_ub, float)[:, S])
    try:
        sub = bland_simplex(np.asarray(c, float)[S], Ad, bd, Ud, b_ub)
    except LPError:
        return None
    if sub.fun > fun + 1e-8 * (1.0 + abs(fun)):
        return None
    out = np.zeros_like(x)
    out[S] = np.maximum(sub.x, 0.0)
    return out


def bland_simplex(c, A_eq, b_eq, A_ub=None, b_ub=None, tol: float = 1e-10,
                  max_iter: int = 100_000) -> LPResult:
    """Dense two-phase tableau simplex with Bland's anti-cycling rule."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    m_eq, m_ub = A_eq.shape[0], A_ub.shape[0]

    # standard form: slacks for the <= rows
    A = np.block([[A_eq, np.zeros((m_eq, m_ub))], [A_ub, np.eye(m_ub)]])
    b = np.concatenate([b_eq, b_ub])
    cost = np.concatenate([c, np.zeros(m_ub)])
    sign = np.where(b < 0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign
    m, nv = A.shape

    # phase I tableau with artificials
    T = np.zeros((m + 1, nv + m + 1))
    T[:m, :nv] = A
    T[:m, nv:nv + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(nv, nv + m))
    T[m, :] = 0.0
    T[m, nv:nv + m] = 1.0
    for i in range(m):
        T[m] -= T[i]
    it = _pivot_loop(T, basis, nv + m, tol, max_iter)
    if -T[m, -1] > 1e-8 * max(1.0, np.abs(b).max(initial=0.0)):
        raise InfeasibleError("phase I optimum is positive: constraints are infeasible")

    # drive artificials out; drop redundant rows
    keep = []
    for i in range(m):
        if basis[i] >= nv:
            cand = np.nonzero(np.abs(T[i, :nv]) > 1e-9)[0]
            if cand.size:
                _pivot(T, basis, i, int(cand[0]))
                keep.append(i)
        else:
            keep.append(i)
    rows = keep
    T2 = np.zeros((len(rows) + 1, nv + 1))
    T2[:-1, :nv] = T[rows, :nv]
    T2[:-1, -1] = T[rows, -1]
    basis = [basis[i] for i in rows]
    T2[-1, :nv] = cost
    for i, bi in enumerate(basis):
        T2[-1] -= cost[bi] * T2[i]
    it += _pivot_loop(T2, basis, nv, tol, max_iter)

    xs = np.zeros(nv)
    for i, bi in enumerate(basis):
        xs[bi] = T2[i, -1]
    x = xs[:n]
    # duals from the final basis: B^T y = c_B on the original (sign-fixed) rows
    B = A[:, basis]
    y_signed, *_ = np.linalg.lstsq(B.T, cost[basis], rcond=None)
    y = y_signed * sign
    return LPResult(x, float(c @ x), y[:m_eq], y[m_eq:], it, "simplex")


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]
    basis[row] = col


def _pivot_loop(T, basis, ncols, tol, max_iter) -> int:
    m = T.shape[0] - 1
    for it in range(max_iter):
        red = T[m, :ncols]
        entering = np.nonzero(red < -tol)[0]
        if entering.size == 0:
            return it
        col = int(entering[0])  # Bland: lowest index
        column = T[:m, col]
        pos = column > tol
        if not np.any(pos):
            raise UnboundedError("objective unbounded below")
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / column[pos]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))[0]
        row = int(min(ties, key=lambda i: basis[i]))  # Bland: lowest basic index
        _pivot(T, basis, row, col)
    raise LPError(f"simplex did not finish in {max_iter} pivots")
