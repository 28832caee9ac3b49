"""Acceptance criteria 1-9 at the reference resolution.

Each test prints one ``[PASS]`` / ``[FAIL]`` line for its criterion (visible
in ``pytest -v`` output) before asserting.
"""
import numpy as np
import pytest

from conftest import mane
from wkam.critical import critical_value_ergodic, critical_value_lp, find_c0
from wkam.lab import ExperimentConfig
from wkam.lab.runners import compute_selection, run_convergence, run_counterexample, run_shifted
from wkam.mather import (CONSTRAINT_TOL, build_polytope, check_L4, face_support_nodes,
                         optimal_face_optimize, peierls_barrier, select_u0, solve_mather_lp)
from wkam.model import alpha_coupled, discounted_linear, frozen, pendulum, scale_coupling
from wkam.solver import SchemeParams, action_iterates, apply_operator, lagrangian_table, stencil
from wkam.torus_grid import Grid, VelocityGrid, sup_dist

LADDER = [2.0 ** -k for k in range(1, 10)]  # 1/2 ... 1/512

# measures emitted by the LP layer during this module, re-checked in criterion 9
EMITTED = []


def announce(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def poly4(sp):
    return build_polytope(None, Grid(4.0, 1024), sp.vgrid, sp.tau)


@pytest.fixture(scope="module")
def convergence_report():
    cfg = ExperimentConfig(kind="converge", model="discounted_linear", lambda_ladder=LADDER)
    return run_convergence(cfg)


@pytest.fixture(scope="module")
def shifted_selection(poly4, sp):
    return compute_selection(alpha_coupled(4, offset=0.2), poly4.grid, sp)


def test_criterion_1_pendulum_critical_value(capsys, sp, grid1, poly1):
    erg = critical_value_ergodic(pendulum(1), sp, grid1)
    lp = critical_value_lp(pendulum(1), poly1)
    ok = abs(erg.value - 1) <= 1e-2 and abs(lp.value - 1) <= 1e-2 and abs(erg.value - lp.value) <= 2e-2
    announce(capsys, 1, ok, f"ergodic {erg.value:.8f} (+-{erg.error:.1e}), lp {lp.value:.8f}, "
                            f"gap {abs(erg.value - lp.value):.2e} (tol 1e-2 / 2e-2)")


def test_criterion_2_peierls_barrier(capsys, pendulum_barrier, grid1):
    # independent oracle: windowed DP at double resolution in space and time
    g2 = Grid(1.0, 512)
    sp2 = SchemeParams(tau=0.005, vgrid=VelocityGrid(3.0, 241))
    _, lo, _ = action_iterates(pendulum(1), 1.0, [0], 8000, sp2, g2, window=(4000, 8000))
    oracle_half = float(lo[0, 256])
    half = pendulum_barrier.h(0, grid1.index_of(0.5))
    zero = pendulum_barrier.h(0, 0)
    ok = (abs(half - 2 / np.pi) <= 2e-2 and abs(oracle_half - 2 / np.pi) <= 2e-2
          and abs(half - oracle_half) <= 2e-2 and abs(zero) <= 1e-2)
    announce(capsys, 2, ok, f"h(0,1/2) = {half:.5f} (2/pi = {2 / np.pi:.5f}, double-resolution "
                            f"oracle {oracle_half:.5f}), h(0,0) = {zero:.2e}")


def test_criterion_3_mather_face(capsys, poly4, sp):
    lp = solve_mather_lp(poly4, pendulum(4))
    EMITTED.append((poly4, lp.mu))
    g, vel = poly4.grid, poly4.vgrid.velocities
    dv = poly4.vgrid.step
    ii, jj = np.nonzero(lp.near_face(1e-4))
    dist = np.abs(g.nodes[ii] - np.rint(g.nodes[ii]))
    inside = bool(np.all(dist <= g.spacing + 1e-12) and np.all(np.abs(vel[jj]) <= dv + 1e-12))
    # the face reaches each of the four equilibria
    reach = []
    for k in range(4):
        near = np.abs(((g.nodes - k + 2) % 4) - 2) <= g.spacing + 1e-12
        obj = np.where(near[:, None], 1.0, 0.0) * np.ones(poly4.shape)
        val, mu = optimal_face_optimize(poly4, pendulum(4), lp.value, obj, "max")
        EMITTED.append((poly4, mu))
        reach.append(val)
    ok = inside and min(reach) >= 1 - 1e-6 and abs(lp.value + 1) <= 1e-2
    announce(capsys, 3, ok, f"value {lp.value:.8f}; face variables within one cell of (k,0): "
                            f"{inside}; max face mass near k = 0..3: "
                            f"{', '.join(f'{r:.6f}' for r in reach)}")


def test_criterion_4_L4_verdicts(capsys, poly4, poly1, linear_lp):
    bad = check_L4(alpha_coupled(4), poly4)
    lin = check_L4(discounted_linear(1), poly1, linear_lp)
    pos = check_L4(alpha_coupled(4, offset=0.2), poly4)
    ok = (bad.verdict == "fails" and bad.face_max_dLdu >= -1e-3
          and lin.verdict == "holds" and lin.face_max_dLdu <= -0.9
          and pos.verdict == "holds" and pos.face_max_dLdu <= -0.19)
    announce(capsys, 4, ok, f"alpha_coupled(4) {bad.verdict} ({bad.face_max_dLdu:.3g}); "
                            f"discounted_linear(1) {lin.verdict} ({lin.face_max_dLdu:.3g}); "
                            f"alpha+0.2 {pos.verdict} ({pos.face_max_dLdu:.3g})")


def test_criterion_5_limit_selection(capsys, convergence_report, grid1):
    sel = compute_selection(discounted_linear(1), grid1, SchemeParams())
    EMITTED.append((sel.polytope, sel.lp.mu))
    row0 = sel.barrier.row(0)
    sel_err = float(np.max(np.abs(sel.u0.values - row0)))
    analytic = float(np.max(np.abs(sel.u0.values - mane(grid1.nodes))))
    errors = [r["error"] for r in convergence_report.rows]
    monotone = bool(np.all(np.diff(errors) <= 0))
    ok = sel_err <= 3e-2 and monotone and errors[-1] <= 5e-2
    announce(capsys, 5, ok, f"|u0 - h(0,.)| = {sel_err:.2e} (analytic {analytic:.2e}); "
                            f"e_lambda {errors[0]:.3e} -> {errors[-1]:.3e}, non-increasing: "
                            f"{monotone}")


def test_criterion_6_counterexample(capsys):
    cfg = ExperimentConfig(kind="counterexample", model="alpha_coupled", model_params={"n": 4},
                           lambda_ladder=[1.0, 0.5, 0.25])
    rep = run_counterexample(cfg)
    tol = cfg.scheme().tol
    res = max(max(r["v1_residual"], r["v2_residual"]) for r in rep.rows)
    gaps = [r["gap"] for r in rep.rows]
    failed = [v.name for v in rep.verdicts if not (v.passed or v.informational)]
    ok = (res <= 10 * tol and min(gaps) >= 1.0 and abs(rep.data["v1_peak"] - 2 / np.pi) <= 1e-3
          and abs(rep.data["v2_peak"] - 4 / np.pi) <= 1e-3 and not failed)
    announce(capsys, 6, ok, f"max residual {res:.2e} (<= {10 * tol:.0e}); gaps "
                            f"{', '.join(f'{g:.5f}' for g in gaps)}; v1(1/2) = "
                            f"{rep.data['v1_peak']:.6f}, v2(1) = {rep.data['v2_peak']:.6f}"
                            + (f"; failing checks {failed}" if failed else ""))


def test_criterion_7_equibounded_equilipschitz(capsys, convergence_report):
    rows = convergence_report.rows
    band = min(r["band_slack"] for r in rows)
    lips = np.array([r["lipschitz"] for r in rows])
    bound = max(r["lipschitz_bound"] for r in rows)
    ok = band >= 0 and lips.max() <= 1.1 * lips.max() and lips.max() <= 1.1 * bound
    announce(capsys, 7, ok, f"min distance inside the band {band:.3e}; Lipschitz estimates "
                            f"{lips.min():.4f}..{lips.max():.4f} (a-priori bound {bound:.4f})")


def test_criterion_8_shift(capsys, sp, grid1):
    c0 = find_c0(discounted_linear(1), sp=sp, grid=grid1)
    rep = run_shifted(ExperimentConfig(kind="shifted", model="discounted_linear",
                                       lambda_ladder=LADDER))
    errors = [r["error"] for r in rep.rows]
    monotone = bool(np.all(np.diff(errors) <= 0))
    ok = abs(c0 + 1) <= 2e-2 and monotone
    announce(capsys, 8, ok, f"c0 = {c0:.10f}; shifted errors {errors[0]:.3e} -> "
                            f"{errors[-1]:.3e}, non-increasing: {monotone}")


def test_criterion_9_properties(capsys, sp, grid1, poly1, pendulum_lp, linear_lp, poly4,
                                shifted_selection):
    rng = np.random.default_rng(2024)
    st = stencil(grid1, sp.vgrid, sp.tau)
    Ltab = lagrangian_table(pendulum(1), grid1, st)
    mono_bad = comm_worst = 0.0
    for _ in range(100):
        f = rng.normal(size=grid1.points) * rng.uniform(0.1, 10)
        g = f + np.abs(rng.normal(size=grid1.points)) * (rng.uniform(size=grid1.points) < 0.5)
        a = float(rng.uniform(-10, 10))
        Tf, _ = apply_operator(f, st, Ltab, 1.0, sp.tau, want_argmin=False)
        Tg, _ = apply_operator(g, st, Ltab, 1.0, sp.tau, want_argmin=False)
        Tfa, _ = apply_operator(f + a, st, Ltab, 1.0, sp.tau, want_argmin=False)
        mono_bad = max(mono_bad, float(np.max(Tf - Tg)))
        # exact up to the rounding of adding a, measured in ulps of the result
        ulps = np.abs(Tfa - (Tf + a)) / np.spacing(np.maximum(np.abs(Tfa), np.abs(Tf) + abs(a)))
        comm_worst = max(comm_worst, float(ulps.max()))
    monotone = mono_bad <= 0.0
    commutes = comm_worst <= 4

    sel = shifted_selection
    EMITTED.extend([(poly1, pendulum_lp.mu), (poly1, linear_lp.mu), (sel.polytope, sel.lp.mu)])
    viol = max(p.violation(mu.weights) for p, mu in EMITTED)

    m = alpha_coupled(4, offset=0.2)
    scaled = select_u0(scale_coupling(m, 3.0), sel.barrier, sel.polytope, sel.lp, sp)
    scale_diff = sup_dist(scaled, sel.u0)

    ok = monotone and commutes and viol <= CONSTRAINT_TOL and scale_diff <= 1e-7
    announce(capsys, 9, ok, f"monotone on 100 pairs: {monotone}; constant commutation within "
                            f"{comm_worst:.0f} ulp; {len(EMITTED)} emitted measures, worst "
                            f"violation {viol:.1e}; select_u0 scale-3 change {scale_diff:.1e}")
