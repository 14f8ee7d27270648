"""
Regimes and the radial heat kernel
==================================

Where a pair of exponents sits decides which trace condition is the sharp
one.  This script walks through the regime map and then checks the discrete
heat semigroup that every later computation is built on.
"""

# %%
from fractions import Fraction

import numpy as np

from ptlab.exponents import ExponentConfig, classify
from ptlab.kernel import RadialField, gauss, gauss_total_mass, make_mesh, propagate

# %% [markdown]
# Regime labels for a few dimensions.  Rational inputs are compared exactly,
# so configurations sitting on a boundary get the boundary label.

# %%
for N in (1, 2, 3):
    fuj = 1 + Fraction(2, N)
    row = []
    for p, q in [(Fraction(1, 2), 4), (1, 3), (2, 2), (fuj, fuj), (2, 3), (3, 3)]:
        cfg = ExponentConfig(N, p, q)
        row.append(f"({p},{q})->{classify(cfg).value}")
    print(f"N={N}: " + "  ".join(row))

# %% [markdown]
# The kernel integrates to one, and the discrete semigroup composes.

# %%
print("mass of G:", [f"{gauss_total_mass(t, 3) - 1:+.1e}" for t in (0.01, 1.0, 100.0)])

mesh = make_mesh(3, Rmax=16.0, M=48)
f = RadialField(mesh, np.exp(-mesh.nodes ** 2) * (1 + 0.5 * np.cos(2 * mesh.nodes)))
once = propagate(f, 0.7).values
twice = propagate(propagate(f, 0.3), 0.4).values
inner = mesh.nodes < 8
print("semigroup defect:", np.max(np.abs(once - twice)[inner]) / once.max())

# %%
# a narrow Gaussian stands in for a point mass; after time t it is G(., t + width)
f = RadialField(mesh, gauss(mesh.nodes, 0.01, 3))
g = propagate(f, 0.5)
print("max deviation from G:", np.max(np.abs(g.values - gauss(mesh.nodes, 0.51, 3))))
