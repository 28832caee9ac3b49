# %% [markdown]
# Vanishing discount for H(x, p, u) = p^2/2 + cos(2 pi x) + u.
#
# dL/du = -1 is strictly negative on the Mather measure, so u_lambda
# converges as lambda -> 0, and the limit is picked by the selection formula.
# Here the Mather measure is the Dirac mass at (0, 0), so the limit is the
# barrier h(0, .).

# %%
import numpy as np

from wkam.lab import ExperimentConfig, run_convergence
from wkam.model import discounted_linear
from wkam.lab.runners import compute_selection

cfg = ExperimentConfig(kind="converge", model="discounted_linear",
                       lambda_ladder=[2.0 ** -k for k in range(1, 10)])
m = discounted_linear(1)

# %% the selected limit
sel = compute_selection(m, cfg.grid(), cfg.scheme())
print(f"critical value {sel.c:.8f}, (L4) {sel.l4.verdict} ({sel.l4.face_max_dLdu:+.3f})")
print("u0(1/2) =", sel.u0.values[128], " 2/pi =", 2 / np.pi)

# %% u_lambda against u0 over the ladder
rep = run_convergence(cfg)
print("\n lambda       sup|u_lam - u0|   Lipschitz")
for r in rep.rows:
    print(f" {r['lambda']:<11.6g} {r['error']:.6e}      {r['lipschitz']:.4f}")
print(f"\nRichardson value from the last two rungs: error {rep.data['extrapolated_error']:.2e}")
for v in rep.verdicts:
    print(("PASS " if v.passed else "FAIL ") + v.name + ": " + v.comparison)
