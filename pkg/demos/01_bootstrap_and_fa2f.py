"""Bootstrap percolation and the FA-2f dynamics on small tori.

Run with ``python3 demos/01_bootstrap_and_fa2f.py``.  Cells are marked
with ``# %%`` so the file also opens as a notebook in editors that
understand the convention.
"""

# %%
import math

import numpy as np

from fa2f import bootstrap, kcm
from fa2f.lattice import ALL_HEALTHY, Config, Region, SeededRng, sample_config

# %% [markdown]
# Two-neighbour bootstrap percolation: a healthy site becomes infected
# once two of its neighbours are.  The closure of a random configuration
# is a union of rectangles.

# %%
R = Region.rectangle(12, 8)
cfg = sample_config(R, 0.12, SeededRng(1))
res = bootstrap.bp_closure(2, R, ALL_HEALTHY, cfg)
print("initial\n" + cfg.to_text())
print(f"closed after {res.rounds} rounds\n" + res.closed.to_text())
print("components:", bootstrap.closure_components(res.closed.infected))

# %% [markdown]
# The sharp-threshold constant and the crossing probability rho of a
# small box give a lower bound on the FA-2f infection time of the origin.

# %%
c = bootstrap.constants()
print({k: round(v, 12) for k, v in c.items()})
V = Region.box((-4, -4), (4, 4))
for q in (0.25, 0.35, 0.5):
    rho, se = bootstrap.estimate_rho(V, q, 20000, SeededRng(2, int(q * 100)))
    print(f"q={q}: rho={rho:.4f} +- {se:.4f}, tau0 >= {bootstrap.tau0_lower_bound(max(rho, 1e-12), V, q):.4g}")

# %% [markdown]
# First BP round infecting the origin on a 256 x 256 torus.  log(median)
# times q / lambda creeps up as q falls; the approach to 1 is slow.

# %%
lam = c["lambda(2,2)"]
T = Region.torus(256, 256)
for q in (0.3, 0.2, 0.15):
    s = bootstrap.bp_tau0_samples(T, q, 300, SeededRng(3, int(q * 100)))
    med = s.median
    print(f"q={q}: median tau0_BP={med}, q log(median)/lambda={q * math.log(max(med, 1)) / lam:.3f}")

# %% [markdown]
# FA-2f: Glauber dynamics that may only resample sites with two infected
# neighbours.  Mean infection time of the origin from equilibrium.

# %%
for q in (0.5, 0.4, 0.3):
    p = kcm.SimParams(2, q, Region.torus(64, 64), t_max=1e7, rng=SeededRng(4, int(q * 10)))
    s = kcm.fa_tau0_samples(p, 200)
    print(f"q={q}: mean tau0={s.summary.censored_mean:.3f}, hit fraction={s.summary.hit_fraction}")

# %% [markdown]
# The dynamics keeps the product measure invariant: occupancy and
# neighbouring-pair densities stay at q and q^2.

# %%
rep = kcm.stationarity_check(kcm.SimParams(2, 0.3, Region.torus(16, 16), rng=SeededRng(5)), 50.0, 2000.0)
print(f"occupancy {rep.occupancy:.4f} (z={rep.z_occupancy:.2f}), pairs {rep.pairs:.4f} (z={rep.z_pairs:.2f})")
