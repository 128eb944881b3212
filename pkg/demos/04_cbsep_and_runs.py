"""CBSEP, cover times and the experiment runner.

Run with ``python3 demos/04_cbsep_and_runs.py``; outputs go to a
temporary directory.
"""

# %%
import math
import tempfile
from fractions import Fraction
from pathlib import Path

from fa2f import cbsep, harness, spectral
from fa2f.cbsep import GCBSEPParams, Graph
from fa2f.lattice import SeededRng

# %% [markdown]
# Binary CBSEP on small tori: T_rel against p^-1 max(1, log 1/p).

# %%
for row in cbsep.scaling_study(ns=(4, 9), ps=[0.5, 0.25, 0.125]):
    print(f"n={row.n} p={row.p:<6} T_rel={row.t_rel:8.4f} ratio={row.ratio:.3f}")

# %% [markdown]
# The generalised chain projects exactly (strong lumpability) onto the
# binary one with p = pi(S_1).

# %%
params = GCBSEPParams(Graph.torus(2), (Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)), (True, False, False))
res = spectral.lumpability_check(cbsep.gcbsep_build(params), cbsep.particle_projection(params))
print("lumpable:", res.lumpable, "residual:", res.residual, "lumped states:", res.lumped.states)

# %% [markdown]
# Cover time of the random walk on the L x L torus relative to L^2 log L.

# %%
for L in (4, 8, 16):
    m = cbsep.cover_time_estimate(Graph.torus(L), 200, SeededRng(9, L))
    print(f"L={L}: mean cover {m:.1f}, ratio {m / (L * L * math.log(L)):.3f}")

# %% [markdown]
# The same studies through the runner: a key = value config, a write-once
# output directory and an SVG plot.

# %%
root = Path(tempfile.mkdtemp(prefix="fa2f-demo-"))
cfg = harness.ExperimentConfig.parse(
    "schema = 1\nexperiment = r-study\noperation = droplet.r_study\nseed = 0\n"
)
cfg.output = str(root)
rec, dest = harness.run(cfg)
print((dest / "results.csv").read_text())
svg = harness.plot([dest / "results.csv"], harness.PlotSpec(**harness.PLOT_PRESETS["rq"]), root / "rq.svg")
print("plot:", svg)
