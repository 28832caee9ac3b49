# %% [markdown]
# Pendulum on the circle: critical value, Mather measure, Peierls barrier.
#
# H(x, p) = p^2/2 + cos(2 pi x) has critical value 1.  The only minimizing
# measure sits at the potential maximum x = 0 and the barrier from 0 is
# (2/pi)(1 - |cos pi x|).

# %%
import numpy as np

from wkam import (SchemeParams, build_polytope, critical_value_ergodic, critical_value_lp,
                  peierls_barrier, solve_mather_lp)
from wkam.model import pendulum
from wkam.torus_grid import Grid

m = pendulum(1)
sp = SchemeParams()
grid = Grid(1.0, 256)

# %% critical value, two ways
poly = build_polytope(m, grid, sp.vgrid, sp.tau)
lp = critical_value_lp(m, poly)
erg = critical_value_ergodic(m, sp, grid)
print(f"c(H) by LP      : {lp.value:.10f}")
print(f"c(H) by -lam u  : {erg.value:.10f}  (+- {erg.error:.1e})")
for lam, c in erg.samples:
    print(f"    lambda = {lam:<7g} -mean(lambda u) = {c:.8f}")

# %% the Mather measure
value, mu = solve_mather_lp(poly, m)
print("\nMather LP value", value)
for x, v, w in mu.support(1e-12):
    print(f"    mass {w:.3f} at x = {x:.4f}, v = {v:+.3f}")

# %% barrier from x = 0 against the closed form
bt = peierls_barrier(m, [0], sp=sp, grid=grid, c=lp.value)
mane = 2 / np.pi * (1 - np.abs(np.cos(np.pi * grid.nodes)))
print("\n   x      h(0,x)    closed form")
for i in range(0, 257, 32):
    i = min(i, 255)
    print(f"{grid.nodes[i]:6.3f}  {bt.h(0, i):9.5f}  {mane[i]:9.5f}")
print("sup error", np.max(np.abs(bt.row(0) - mane)))
