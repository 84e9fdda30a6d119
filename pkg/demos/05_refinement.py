"""Refinement study behind the declared tolerances.

Each quantity is printed for n = 256, 512, 1024 at r_max = 60.  The last
column (relative sup drift of the calibrated profile over 1000 steps) is
the one that is not yet inside its 1 % budget at n = 512.
"""

import numpy as np

from aggdiff import cached_kernel, calibrated_steady, make_grid, make_params
from aggdiff.diagnostics import entropy
from aggdiff.solver import make_state, step
from aggdiff.steady import lm_constant, pohozaev_residual, stationarity_residual, steady_profile

p = make_params(3, 1.25)
print("    n   L^m err   lam/2 vs 2lam   residual   Pohozaev   drift(1000 steps)")
for n in (256, 512, 1024):
    g = make_grid(60.0, n, 3)
    K = cached_kernel(g, p)
    S1 = {lam: entropy(steady_profile(lam, 1.0, g, p).profile, p) for lam in (0.5, 1.0, 2.0)}
    ss = calibrated_steady(1.0, g, p, K)
    state = make_state(0.0, ss.profile, K, p)
    drift = 0.0
    for _ in range(1000):
        state = step(state, K, p)
        drift = max(drift, np.max(np.abs(state.u.values - ss.profile.values)) / ss.profile.values.max())
    print(f"{n:5d}  {abs(S1[1.0] / lm_constant(p) - 1):.2e}   {abs(S1[0.5] - S1[2.0]) / S1[1.0]:.2e}"
          f"        {stationarity_residual(ss, K):.2e}   "
          f"{abs(pohozaev_residual(ss, K)) / entropy(ss.profile, p):.2e}   {drift:.2e}")
