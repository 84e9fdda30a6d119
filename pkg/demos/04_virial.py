"""The second-moment (virial) law along a trajectory.

d/dt int |x|^2 u = -4s int u^m + 2(d-2s) F(u).  We compare a centred time
difference of the second moment with the right side for kappa = 0.8, on two
grids, for the first-order upwind flux and the limited second-order one.
"""

from aggdiff import InitialData, SimConfig, cached_kernel, run
from aggdiff.acceptance import moment_error

for n in (512, 1024):
    for scheme in ("upwind", "muscl"):
        cfg = SimConfig(n=n, initial=InitialData(kappa=0.8), t_end=0.5, sample_dt=0.02, scheme=scheme)
        tr = run(cfg, cached_kernel(cfg.grid(), cfg.params))
        print(f"n={n:5d} {scheme:7s} max relative virial mismatch {moment_error(tr):.2e}")
