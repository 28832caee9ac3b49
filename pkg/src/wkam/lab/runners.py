"""Experiment runners.  Each takes an ExperimentConfig and returns an ExperimentReport."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .. import critical as crit
from ..mather import (L4Error, build_polytope, check_L4, face_support_nodes, peierls_barrier,
                      select_u0, solve_mather_lp, verify_largest_subsolution)
from ..model import Model, alpha_coupled, frozen, shifted
from ..solver import SolverError, _FixedPointMap, solve_discounted, verify_domination
from ..torus_grid import Grid, GridFunction, lipschitz_estimate, sup_dist
from .config import ConfigError, ExperimentConfig
from .report import ExperimentReport, Verdict, check

logger = logging.getLogger(__name__)


def _report(cfg: ExperimentConfig) -> ExperimentReport:
    return ExperimentReport(cfg.kind, cfg.to_dict())


def _residual(m, lam, c, sp, u: GridFunction) -> float:
    F = _FixedPointMap(m, u.grid, lam, c, sp, None)
    Tu, _ = F(u.values)
    return float(np.max(np.abs(Tu - u.values)))


@dataclass(frozen=True, eq=False)
class Selection:
    """Everything the selection formula needs, computed once per model/grid."""

    polytope: object
    lp: object
    l4: object
    barrier: object
    u0: GridFunction

    @property
    def c(self) -> float:
        return -self.lp.value


def compute_selection(m: Model, grid: Grid, sp, T1=20.0, T2=40.0, margin=1e-3) -> Selection:
    """Mather LP, (L4) check, barrier rows on the face support and u0.

    Raises:
        L4Error: when (L4) does not hold.
    """
    p = build_polytope(m, grid, sp.vgrid, sp.tau)
    lp = solve_mather_lp(p, frozen(m, 0.0))
    l4 = check_L4(m, p, lp, margin=margin)
    if l4.verdict != "holds":
        raise L4Error(f"(L4) {l4.verdict} for {m.label} (face max of dL/du = "
                      f"{l4.face_max_dLdu:.3e}); the limit is not selected. "
                      "Use the counterexample experiment to study this case.")
    bt = peierls_barrier(frozen(m, 0.0), face_support_nodes(lp), T1, T2, sp, grid, c=-lp.value)
    u0 = select_u0(m, bt, p, lp, sp, l4=l4)
    return Selection(p, lp, l4, bt, u0)


def _monotone_verdict(name, errors, slack) -> Verdict:
    inc = float(np.max(np.diff(errors))) if len(errors) > 1 else 0.0
    return check(name, inc, "<=", slack, "largest increase of consecutive errors")


def _ladder_csv(rows, keys) -> str:
    return ",".join(keys) + "\n" + "".join(
        ",".join(repr(float(r[k])) for k in keys) + "\n" for r in rows)


def apriori_lipschitz(m: Model, u: GridFunction, lam: float, c: float) -> float:
    """Largest |p| with H(x, p, lam u(x)) <= c at some node, plus one step of
    the momentum grid it is read from: a slope bound for subsolutions of the
    discounted equation."""
    p = m.pgrid.velocities
    x = u.grid.nodes
    H = np.asarray(m.H(x[:, None], p[None, :], lam * u.values[:, None]), dtype=float)
    ok = H <= c + 1e-9
    if not ok.any():
        return 0.0
    return float(np.abs(p[None, :] * ok).max()) + m.pgrid.step


# ---------------------------------------------------------------------------


def run_solve(cfg: ExperimentConfig) -> ExperimentReport:
    m = cfg.build_model()
    grid, sp = cfg.grid(), cfg.scheme()
    c = crit.critical_value(m, 0.0, "lp", sp, grid)
    rep = _report(cfg)
    u = GridFunction.constant(grid, 0.0)
    for k, lam in enumerate(cfg.lambda_ladder):
        sol = solve_discounted(m, lam, c, sp, u)
        u = sol.u
        dom = verify_domination(m, sol, 50, sp)
        rep.rows.append({"lambda": lam, "residual": sol.residual, "iterations": sol.iterations,
                         "min": float(u.values.min()), "max": float(u.values.max()),
                         "lipschitz": lipschitz_estimate(u), "domination": dom.worst_slack})
        rep.verdicts.append(check(f"residual[lambda={lam:g}]", sol.residual, "<=", sp.tol))
        rep.verdicts.append(check(f"domination[lambda={lam:g}]", dom.worst_slack, ">=", -dom.bound))
        rep.files[f"u_lambda_{k}.csv"] = sol.to_csv()
    rep.data["c"] = c
    return rep


def run_critical(cfg: ExperimentConfig) -> ExperimentReport:
    m = cfg.build_model()
    grid, sp = cfg.grid(), cfg.scheme()
    m0 = frozen(m, 0.0)
    erg = crit.critical_value_ergodic(m0, sp, grid)
    lp = crit.critical_value_lp(m0, build_polytope(m0, grid, sp.vgrid, sp.tau))
    rep = _report(cfg)
    for cv in (erg, lp):
        rep.rows.append({"method": cv.method, "value": cv.value, "error": cv.error})
    gap = abs(erg.value - lp.value)
    rep.verdicts.append(check("agreement", gap, "<=", 2e-2, "|ergodic - lp|"))
    rep.data.update(ergodic=erg.value, lp=lp.value, gap=gap, flags=list(erg.flags))
    rep.files["critical.csv"] = crit.critical_csv([(m.label, erg), (m.label, lp)])
    print(f"{m.label}: ergodic {erg.value:.8f} (+-{erg.error:.1e})  lp {lp.value:.8f}  "
          f"gap {gap:.2e}")
    return rep


def run_mather(cfg: ExperimentConfig) -> ExperimentReport:
    m = cfg.build_model()
    grid, sp = cfg.grid(), cfg.scheme()
    p = build_polytope(m, grid, sp.vgrid, sp.tau)
    lp = solve_mather_lp(p, frozen(m, 0.0))
    l4 = check_L4(m, p, lp, margin=cfg.margin)
    rep = _report(cfg)
    viol = p.violation(lp.mu.weights)
    rep.verdicts.append(check("measure feasible", viol, "<=", 1e-9, "largest constraint violation"))
    rep.verdicts.append(Verdict("L4", l4.verdict == "holds", l4.face_max_dLdu, -cfg.margin,
                                f"{l4.face_max_dLdu:.6g} <= {-cfg.margin:.6g}", l4.verdict,
                                informational=True))
    nodes = face_support_nodes(lp)
    rep.data.update(lp_value=lp.value, l4=l4.verdict, face_max_dLdu=l4.face_max_dLdu,
                    face_support_x=grid.nodes[nodes])
    rep.files["mather_measure.csv"] = lp.mu.to_csv()
    rep.files["l4.json"] = l4.to_json()
    return rep


def run_barrier(cfg: ExperimentConfig) -> ExperimentReport:
    m = cfg.build_model()
    grid, sp = cfg.grid(), cfg.scheme()
    bt = peierls_barrier(frozen(m, 0.0), list(cfg.anchors), cfg.T1, cfg.T2, sp, grid)
    rep = _report(cfg)
    for s, res, osc in zip(bt.sources, bt.residuals, bt.oscillation.max(axis=1)):
        rep.rows.append({"source": float(grid.nodes[s]), "h_diag": float(bt.h(s, s)),
                         "residual": float(res), "oscillation": float(osc)})
    rep.verdicts.append(check("fixed point", float(bt.residuals.max()), "<=", 1e-6,
                              "one-step residual of h(x, .)"))
    rep.verdicts.append(check("window oscillation", float(bt.oscillation.max()), "<=",
                              10 * sp.tol, "liminf window check"))
    rep.data["c"] = bt.c
    rep.files["barrier.csv"] = bt.to_csv()
    return rep


def run_limit(cfg: ExperimentConfig) -> ExperimentReport:
    m = cfg.build_model()
    grid, sp = cfg.grid(), cfg.scheme()
    sel = compute_selection(m, grid, sp, cfg.T1, cfg.T2, cfg.margin)
    vr = verify_largest_subsolution(sel.u0, m, sel.polytope, sel.lp, sel.barrier, sp,
                                    reference=sel.u0)
    rep = _report(cfg)
    rep.verdicts += [
        check("subsolution", vr.worst_domination_slack, ">=", -vr.tol),
        check("constraint", vr.face_min, ">=", -vr.tol, "min over face of int u0 dL/du"),
        check("u0 + delta violates constraint", vr.shifted_face_min, "<", -vr.tol),
    ]
    rep.data.update(c=sel.c, l4=sel.l4.face_max_dLdu, **{k: v for k, v in vr.summary().items()})
    rep.files["u0.csv"] = sel.u0.to_csv()
    rep.files["barrier.csv"] = sel.barrier.to_csv()
    return rep


def run_convergence(cfg: ExperimentConfig) -> ExperimentReport:
    """e_lambda = sup |u_lambda - u0| over the ladder, plus the bounds on u_lambda."""
    m = cfg.build_model()
    grid, sp = cfg.grid(), cfg.scheme()
    try:
        sel = compute_selection(m, grid, sp, cfg.T1, cfg.T2, cfg.margin)
    except L4Error as exc:
        raise L4Error(f"{exc} (see run_counterexample)") from exc
    c = sel.c
    u_hat = solve_discounted(m, 0.0, c, sp, GridFunction.constant(grid, 0.0), anchor=(0, 0.0)).u
    lo_band = u_hat.values - u_hat.values.max() - cfg.band_eps
    hi_band = u_hat.values - u_hat.values.min() + cfg.band_eps
    rep = _report(cfg)
    u = GridFunction.constant(grid, 0.0)
    sols = []
    for k, lam in enumerate(cfg.lambda_ladder):
        sol = solve_discounted(m, lam, c, sp, u)
        u = sol.u
        sols.append(sol)
        band = float(min((u.values - lo_band).min(), (hi_band - u.values).min()))
        rep.rows.append({"lambda": lam, "error": sup_dist(u, sel.u0), "residual": sol.residual,
                         "iterations": sol.iterations, "lipschitz": lipschitz_estimate(u),
                         "lipschitz_bound": apriori_lipschitz(m, u, lam, c),
                         "band_slack": band})
        rep.files[f"u_lambda_{k}.csv"] = sol.to_csv()
    errors = [r["error"] for r in rep.rows]
    if len(errors) > 1:
        rep.verdicts.append(_monotone_verdict("errors non-increasing", errors, cfg.monotone_slack))
    rep.verdicts.append(check("final error", errors[-1], "<=", cfg.final_tol))
    rep.verdicts.append(check("residuals", max(r["residual"] for r in rep.rows), "<=", sp.tol))
    rep.verdicts.append(check("equibounded", min(r["band_slack"] for r in rep.rows), ">=", 0.0,
                              "distance inside [u^ - max u^ - eps, u^ - min u^ + eps]"))
    lips = np.array([r["lipschitz"] for r in rep.rows])
    rep.verdicts.append(check("equi-Lipschitz (ladder)", float(lips.max()), "<=",
                              cfg.lip_factor * float(lips.max())))
    rep.verdicts.append(check("equi-Lipschitz (a priori)", float(lips.max()), "<=",
                              cfg.lip_factor * max(r["lipschitz_bound"] for r in rep.rows)))
    if len(sols) > 1:
        (la, ua), (lb, ub) = [(s.lam, s.u.values) for s in sols[-2:]]
        ext = (la * ub - lb * ua) / (la - lb)
        rep.data["extrapolated_error"] = float(np.max(np.abs(ext - sel.u0.values)))
    rep.data.update(c=c, l4=sel.l4.face_max_dLdu, u0_min=float(sel.u0.values.min()),
                    u0_max=float(sel.u0.values.max()))
    rep.files["u0.csv"] = sel.u0.to_csv()
    rep.files["convergence.csv"] = _ladder_csv(rep.rows, ["lambda", "error", "residual",
                                                          "lipschitz", "band_slack"])
    return rep


# ---------------------------------------------------------------------------
# non-convergence


def mane_integral(oversample: int = 10, points_per_unit: int = 256):
    """(s, F) with F(s) = int_0^s 2|sin(pi t)| dt on [0, 1] by composite Simpson."""
    s = np.linspace(0.0, 1.0, oversample * points_per_unit + 1)
    F = cumulative_simpson(2.0 * np.abs(np.sin(np.pi * s)), x=s, initial=0.0)
    return s, F


def closed_form_profiles(x, oversample: int = 10, points_per_unit: int = 256):
    """v1 (1-periodic) and v2 (2-periodic) sampled at ``x`` from the quadrature."""
    s, F = mane_integral(oversample, points_per_unit)
    x = np.asarray(x, dtype=float)
    d1 = np.abs(x - np.rint(x))
    d2 = np.abs(x - 2.0 * np.rint(x / 2.0))
    return np.interp(d1, s, F), np.interp(d2, s, F)


def one_sided_slopes(values: np.ndarray, j: int, h: float):
    """Second-order left and right difference quotients at node j (periodic)."""
    n = values.size
    f = lambda k: values[(j + k) % n]  # noqa: E731
    left = (3 * f(0) - 4 * f(-1) + f(-2)) / (2 * h)
    right = (-3 * f(0) + 4 * f(1) - f(2)) / (2 * h)
    return float(left), float(right)


def _kink(values, j, h) -> float:
    left, right = one_sided_slopes(values, j, h)
    return right - left


def glued_candidates(u2: GridFunction, grid4: Grid, oversample: int, points_per_unit: int):
    """u_lambda on [0, 2] continued by v1 or v2 (plus u_lambda(2)) on [2, 4]."""
    n2 = u2.grid.points
    x = grid4.nodes
    v1, v2 = closed_form_profiles(x, oversample, points_per_unit)
    out = []
    for v in (v1, v2):
        vals = np.empty(grid4.points)
        vals[:n2] = u2.values
        vals[n2:] = v[n2:] + u2.values[0]
        out.append(GridFunction(grid4, vals))
    return out


def _counterexample_models(cfg):
    if cfg.model != "alpha_coupled":
        raise ConfigError("the counterexample needs model 'alpha_coupled'")
    params = dict(cfg.model_params)
    if params.pop("n", 4) != 4:
        raise ConfigError("the counterexample lives on R/4Z (n = 4)")
    return alpha_coupled(4, **params), alpha_coupled(2, **params)


def run_counterexample(cfg: ExperimentConfig) -> ExperimentReport:
    m4, m2 = _counterexample_models(cfg)
    sp = cfg.scheme()
    grid2, grid4 = cfg.grid(2.0), cfg.grid(4.0)
    c = crit.critical_value(m4, 0.0, "lp", sp, grid4)
    rep = _report(cfg)
    s, F = mane_integral(cfg.oversample, cfg.points_per_unit)
    v1_peak = float(np.interp(0.5, s, F))
    v2_peak = float(F[-1])
    rep.verdicts.append(check("v1(1/2) = 2/pi", abs(v1_peak - 2 / np.pi), "<=", 1e-3))
    rep.verdicts.append(check("v2(1) = 4/pi", abs(v2_peak - 4 / np.pi), "<=", 1e-3))
    junctions = (0, grid2.points)
    u_init = GridFunction.constant(grid2, 0.0)
    gaps = []
    for lam in cfg.lambda_ladder:
        sol2 = solve_discounted(m2, lam, c, sp, u_init)
        cands = glued_candidates(sol2.u, grid4, cfg.oversample, cfg.points_per_unit)
        row = {"lambda": lam, "u_lambda_2": float(sol2.u.values[0])}
        polished = []
        for tag, cand in zip(("v1", "v2"), cands):
            raw = _residual(m4, lam, c, sp, cand)
            raw_jump = max(abs(_kink(cand.values, j, grid4.spacing)) for j in junctions)
            try:
                sol = solve_discounted(m4, lam, c, sp, cand)
            except SolverError as exc:
                F4 = _FixedPointMap(m4, grid4, lam, c, sp, None)
                Tu, _ = F4(cand.values)
                worst = int(np.argmax(np.abs(Tu - cand.values)))
                near = min(junctions, key=lambda j: min(abs(worst - j), grid4.points - abs(worst - j)))
                raise SolverError(f"glued candidate {tag} at lambda={lam:g} is not a discrete "
                                  f"solution: worst node x={grid4.nodes[worst]:.4f}, nearest "
                                  f"junction x={grid4.nodes[near]:.4f}", exc.residual,
                                  exc.iterations) from exc
            dom = verify_domination(m4, sol, 30, sp)
            drift = sup_dist(sol.u, cand)
            # the scheme puts an O(h + dv) kink at every hyperbolic rest point; the
            # gluing must not add to it, so compare with the unglued rest point x = 1
            ref = _kink(sol.u.values, grid2.points // 2, grid4.spacing)
            jump = max(abs(_kink(sol.u.values, j, grid4.spacing) - ref) for j in junctions)
            polished.append(sol.u)
            row.update({f"{tag}_raw_residual": raw, f"{tag}_residual": sol.residual,
                        f"{tag}_domination": dom.worst_slack, f"{tag}_drift": drift,
                        f"{tag}_junction_excess": jump, f"{tag}_raw_junction_kink": raw_jump,
                        f"{tag}_rest_kink": ref})
            rep.verdicts += [
                check(f"{tag} residual[lambda={lam:g}]", sol.residual, "<=", 10 * sp.tol),
                check(f"{tag} domination[lambda={lam:g}]", dom.worst_slack, ">=", -10 * sp.tol),
                check(f"{tag} drift[lambda={lam:g}]", drift, "<=", 0.05,
                      "sup distance from the glued candidate to the certified solution"),
                check(f"{tag} junction[lambda={lam:g}]", jump, "<=", 2 * grid4.spacing,
                      "slope jump at x = 0, 2 minus the jump at the rest point x = 1"),
            ]
        gap = sup_dist(*polished)
        gaps.append(gap)
        row["gap"] = gap
        row["raw_gap"] = sup_dist(*cands)
        rep.rows.append(row)
        rep.verdicts.append(check(f"gap[lambda={lam:g}]", gap, ">=", cfg.gap_threshold))
        rep.files[f"glued_v1_{len(gaps) - 1}.csv"] = polished[0].to_csv()
        rep.files[f"glued_v2_{len(gaps) - 1}.csv"] = polished[1].to_csv()
        u_init = sol2.u
    exhibited = min(gaps) >= cfg.gap_threshold
    rep.data.update(c=c, v1_peak=v1_peak, v2_peak=v2_peak, min_gap=min(gaps),
                    finding="non-convergence exhibited" if exhibited else "not exhibited")
    keys = ["lambda", "gap", "raw_gap", "v1_residual", "v2_residual", "v1_raw_residual",
            "v2_raw_residual", "v1_drift", "v2_drift"]
    rep.files["counterexample.csv"] = _ladder_csv(rep.rows, keys)
    return rep


def run_uniqueness_probe(cfg: ExperimentConfig, seeds=None) -> ExperimentReport:
    """Solve from several initial data at lambda = lambda_ladder[0] and compare.

    Seeds are constants, or "v1" / "v2" for the glued candidates of the
    counterexample (alpha_coupled on R/4Z only).
    """
    m = cfg.build_model()
    grid, sp = cfg.grid(), cfg.scheme()
    lam = cfg.lambda_ladder[0]
    seeds = list(cfg.seeds if seeds is None else seeds)
    c = crit.critical_value(m, 0.0, "lp", sp, grid)
    glued = None
    sols = []
    for seed in seeds:
        if isinstance(seed, str):
            if glued is None:
                m4, m2 = _counterexample_models(cfg)
                u2 = solve_discounted(m2, lam, c, sp, GridFunction.constant(cfg.grid(2.0), 0.0)).u
                glued = dict(zip(("v1", "v2"), glued_candidates(u2, grid, cfg.oversample,
                                                                cfg.points_per_unit)))
            if seed not in glued:
                raise ConfigError(f"unknown seed {seed!r}")
            init = glued[seed]
        else:
            init = GridFunction.constant(grid, float(seed))
        sols.append(solve_discounted(m, lam, c, sp, init))
    rep = _report(cfg)
    threshold = 2 * sp.tol / (sp.tau * lam)
    dists = [0.0]
    for (i, a), (j, b) in itertools.combinations(enumerate(sols), 2):
        d = sup_dist(a.u, b.u)
        dists.append(d)
        rep.rows.append({"seed_a": str(seeds[i]), "seed_b": str(seeds[j]), "distance": d})
    worst = max(dists)
    finding = "unique (empirical)" if worst <= threshold else "multiple solutions"
    rep.data.update(finding=finding, max_distance=worst, threshold=threshold, c=c, lam=lam)
    rep.verdicts.append(Verdict("uniqueness", worst <= threshold, worst, threshold,
                                f"{worst:.6g} <= {threshold:.6g}", finding, informational=True))
    if cfg.expect is not None:
        want = "unique (empirical)" if cfg.expect == "unique" else "multiple solutions"
        rep.verdicts.append(Verdict("expected finding", finding == want, worst, threshold,
                                    f"{finding} == {want}"))
    return rep


def run_shifted(cfg: ExperimentConfig) -> ExperimentReport:
    """Vanishing discount after the shift c0 with c(H^{c0}) = 0."""
    m = cfg.build_model()
    grid, sp = cfg.grid(), cfg.scheme()
    c0 = crit.find_c0(m, cfg.bracket, tol=1e-10, sp=sp, grid=grid)
    ms = shifted(m, c0)
    sel = compute_selection(ms, grid, sp, cfg.T1, cfg.T2, cfg.margin)
    rep = _report(cfg)
    v = GridFunction.constant(grid, 0.0)
    for k, lam in enumerate(cfg.lambda_ladder):
        sol = solve_discounted(m, lam, 0.0, sp, v)
        v = sol.u
        w = sol.u - c0 / lam
        rep.rows.append({"lambda": lam, "error": sup_dist(w, sel.u0), "residual": sol.residual,
                         "iterations": sol.iterations})
        rep.files[f"v_lambda_{k}.csv"] = sol.to_csv()
    errors = [r["error"] for r in rep.rows]
    if len(errors) > 1:
        rep.verdicts.append(_monotone_verdict("errors non-increasing", errors, cfg.monotone_slack))
    rep.verdicts.append(check("residuals", max(r["residual"] for r in rep.rows), "<=", sp.tol))
    rep.data.update(c0=c0, shifted_critical=sel.c, l4=sel.l4.face_max_dLdu)
    rep.files["u0_shifted.csv"] = sel.u0.to_csv()
    rep.files["shifted.csv"] = _ladder_csv(rep.rows, ["lambda", "error", "residual"])
    return rep


RUNNERS = {
    "solve": run_solve,
    "critical": run_critical,
    "mather": run_mather,
    "barrier": run_barrier,
    "limit": run_limit,
    "converge": run_convergence,
    "counterexample": run_counterexample,
    "uniqueness": run_uniqueness_probe,
    "shifted": run_shifted,
}


def run(cfg: ExperimentConfig) -> ExperimentReport:
    return RUNNERS[cfg.kind](cfg)
