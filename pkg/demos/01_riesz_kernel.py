"""The radial Riesz kernel.

In three dimensions the sphere average of |x - y|^-(d-2s) has a closed form,
so the Gauss-Legendre angular rule can be checked directly.  We then build
the shell-averaged matrix on a coarse grid and check the potential of a
uniform ball at its centre against the exact value.
"""

import math

import numpy as np

from aggdiff import Profile, assemble_kernel, make_grid, make_params
from aggdiff.riesz import angular_weight, potential_at_origin

p = make_params(3, 1.25)
beta = p.beta
print(f"d=3, s=1.25: beta = d - 2s = {beta}, m = {p.m:.6f}")

# closed form of the sphere average in d = 3
for r, rho in [(0.5, 0.7), (1.0, 2.0), (10.0, 10.01)]:
    exact = ((r + rho) ** (2 - beta) - abs(r - rho) ** (2 - beta)) / (2 * r * rho * (2 - beta)) / beta
    approx = angular_weight(r, rho, p)
    print(f"  K({r}, {rho}) = {approx:.12f}   closed form {exact:.12f}   rel err {abs(approx / exact - 1):.1e}")

# a uniform ball of radius R: c(0) = omega_d R^(d-beta) / (beta (d-beta))
g = make_grid(4.0, 128, 3)
K = assemble_kernel(g, p)
u = Profile(g, (g.centers < 2.0).astype(float))
exact = 4 * math.pi * 2.0 ** (3 - beta) / (beta * (3 - beta))
print(f"uniform ball, c(0) = {potential_at_origin(u, K):.10f} vs exact {exact:.10f}")
print(f"kernel is symmetric: {np.array_equal(K.entries, K.entries.T)}, positive: {bool(np.all(K.entries > 0))}")
