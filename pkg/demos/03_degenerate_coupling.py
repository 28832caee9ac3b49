# %% [markdown]
# When dL/du vanishes on a Mather measure.
#
# On R/4Z take H = p^2/2 + cos(2 pi x) + alpha(x) u with alpha a bump on
# [1/2, 3/2].  The Mather measures are the Dirac masses at the integers, and
# alpha is zero at 0, 2 and 3, so the non-degeneracy condition fails.  Two
# families of solutions, built by continuing u_lambda with either v1 or v2,
# then stay apart by 4/pi for every lambda.

# %%
from wkam import build_polytope, check_L4
from wkam.lab import ExperimentConfig, run_counterexample, run_uniqueness_probe
from wkam.model import alpha_coupled

cfg = ExperimentConfig(kind="counterexample", model="alpha_coupled", model_params={"n": 4},
                       lambda_ladder=[1.0, 0.5, 0.25])
sp = cfg.scheme()

# %% the condition fails, and holds again once alpha is lifted by 0.2
for m in (alpha_coupled(4), alpha_coupled(4, offset=0.2)):
    rep = check_L4(m, build_polytope(m, cfg.grid(), sp.vgrid, sp.tau))
    print(f"{m.label:<22} max over Mather measures of int dL/du = {rep.face_max_dLdu:+.4f}"
          f" -> {rep.verdict}")

# %% two glued families
rep = run_counterexample(cfg)
print(f"\nv1(1/2) = {rep.data['v1_peak']:.6f}   v2(1) = {rep.data['v2_peak']:.6f}")
print(" lambda   gap      residuals (v1, v2)     drift from glued candidate")
for r in rep.rows:
    print(f" {r['lambda']:<7g} {r['gap']:.5f}  {r['v1_residual']:.1e}, {r['v2_residual']:.1e}"
          f"       {r['v1_drift']:.4f}, {r['v2_drift']:.4f}")
print("finding:", rep.data["finding"])

# %% several solutions at the same lambda
probe = ExperimentConfig(kind="uniqueness", model="alpha_coupled", model_params={"n": 4},
                         lambda_ladder=[1.0])
rep = run_uniqueness_probe(probe, seeds=[0.0, "v1", "v2"])
for r in rep.rows:
    print(f"seed {r['seed_a']:>4} vs {r['seed_b']:>4}: sup distance {r['distance']:.5f}")
print("finding:", rep.data["finding"])
