"""Relaxation times of small constrained chains.

Run with ``python3 demos/03_spectral_gaps.py``.
"""

# %%
from fractions import Fraction

import numpy as np

from fa2f import spectral
from fa2f.droplet import ScaleSequence
from fa2f.errors import ReducibleChainError
from fa2f.lattice import ALL_HEALTHY, ALL_INFECTED, Region

# %% [markdown]
# FA-2f on a 3 x 2 box with an infected boundary is irreducible; with a
# healthy boundary the all-healthy state is frozen and the chain splits.

# %%
R = Region.rectangle(3, 2)
ch = spectral.build_fa_chain(2, R, ALL_INFECTED, 0.3)
print("states", ch.size, "T_rel", spectral.relaxation_time(ch))
try:
    spectral.relaxation_time(spectral.build_fa_chain(2, R, ALL_HEALTHY, 0.3))
except ReducibleChainError as err:
    print("healthy boundary:", err, "- sizes", sorted(len(c) for c in err.components)[-3:])

# %% [markdown]
# With rational q the chain is built in exact arithmetic, so detailed
# balance holds with residual exactly zero.

# %%
ex = spectral.build_fa_chain(2, R, ALL_INFECTED, Fraction(1, 3))
print("exact residual:", ex.detailed_balance_residual())

# %% [markdown]
# gamma: the best constant of the Poincare inequality conditioned on the
# super-good event, by a dense generalised eigenproblem and by Kron
# reduction onto the event.

# %%
toy = ScaleSequence.custom([1, 2, 4])
for q in (0.2, 0.5, 0.8):
    d = spectral.gamma(Region.rectangle(4, 2), ALL_HEALTHY, q, toy, method="dense")
    s = spectral.gamma(Region.rectangle(4, 2), ALL_HEALTHY, q, toy, method="schur")
    print(f"q={q}: gamma dense {d:.6f}, schur {s:.6f}")

# %% [markdown]
# FA-1f on connected shapes in a 3 x 3 box: the exponent
# log T_rel / log(1/q) stays bounded.

# %%
for q in (0.2, 0.3, 0.5):
    exps = [spectral.fa1f_poincare_check(s, q).exponent for s in spectral.connected_subsets(3) if len(s) > 1]
    print(f"q={q}: exponent range [{min(exps):.3f}, {max(exps):.3f}]")

# %% [markdown]
# Block chains: random instances of the two auxiliary chains, with the
# ratio T_rel / T_aux.

# %%
gen = np.random.default_rng(3)
r1 = [spectral.aux_chain_1(**spectral.random_aux1_instance(gen)).ratio for _ in range(50)]
r2 = [spectral.aux_chain_2(**spectral.random_aux2_instance(gen)).ratio for _ in range(50)]
print(f"aux 1 max ratio {max(r1):.3f}, aux 2 max ratio {max(r2):.3f}")
