"""Traversability, the function g and the super-good droplet bound.

Run with ``python3 demos/02_droplet_calculus.py``.
"""

# %%
import math

import numpy as np

from fa2f import bootstrap, droplet
from fa2f.droplet import ScaleSequence
from fa2f.lattice import ALL_HEALTHY, Config, Region, SeededRng, sample_config

# %% [markdown]
# A rectangle is traversable to the right when no two consecutive
# columns (counting the boundary column ahead) are both empty.  Its
# probability comes from a 2 x 2 transfer matrix; the recursion is a
# second, independent route.

# %%
for a in (1, 10, 1000, 10**6):
    tm = droplet.traversable_prob(a, 10, 0.1, "1", "transfer_matrix")
    rec = droplet.traversable_prob(a, 10, 0.1, "1", "recursion")
    print(f"a={a:>7}: log T = {tm:.12g} (recursion {rec:.12g})")

# %% [markdown]
# Per column, log T decays like g(b q'), with q' = -log(1-q).  The
# integral of g is pi^2/18.

# %%
z = np.array([0.01, 0.1, 0.5, 1.0, 2.0, 5.0])
print(dict(zip(z.tolist(), np.round(droplet.g_fn(z), 6).tolist())))
print("integral of g:", droplet.g_integral(), " pi^2/18:", math.pi**2 / 18)

# %% [markdown]
# Length scales ell_m = floor(exp(m sqrt q)/sqrt q) up to N, and the
# lower bound on the super-good probability they give:
# r(q) = -q' log(bound) should approach pi^2/9 as q -> 0.

# %%
sc = ScaleSequence.natural(0.25)
print("q=0.25 scales:", sc.values(8), "N =", droplet.n_final(0.25))
ref = bootstrap.constants()["pi^2/9"]
for q in (0.5, 0.2, 0.1, 1e-3, 1e-6):
    b = droplet.sg_prob_lower_bound(q, detail=True)
    lo, integral, up = droplet.riemann_sums(q)
    print(f"q={q:g}: N={b.N}, r={b.r:.4f}, r/(pi^2/9)={b.r / ref:.4f}, sums [{lo:.4f}, {integral:.4f}, {up:.4f}]")

# %% [markdown]
# At moderate q the integer parts of the scales make r(q) wobble (it is
# not monotone between q = 0.2 and q = 0.1); the limit is reached only
# for very small q.

# %% [markdown]
# Super-good recognition on toy scales (1, 2, 4): a nested sequence of
# cores, each surrounded by traversable strips.  The witness lists the
# core offsets from the outermost level inwards.

# %%
toy = ScaleSequence.custom([1, 2, 4])
R = Region.rectangle(4, 4)
gen = np.random.default_rng(7)
for _ in range(200):
    cfg = sample_config(R, 0.45, gen)
    w = droplet.is_supergood(R, 4, cfg, ALL_HEALTHY, toy)
    if w is not None:
        break
print(cfg.to_text())
print("witness offsets", w.offsets, "levels", w.levels, "positions", w.positions)
print("replays:", droplet.verify_witness(w, R, 4, cfg, ALL_HEALTHY, toy))
