"""The steady family and its amplitude.

U(r) = B (lam/(lam^2 + r^2))^((d+2s)/2) is stationary only for one amplitude
B.  We calibrate B by matching c(0) = m/(m-1) U(0)^(m-1) on the grid, compare
with the homogeneity oracle built from the exact potential, and print the
identities a true steady state must satisfy.
"""

from aggdiff import cached_kernel, calibrated_steady, make_grid, make_params
from aggdiff.diagnostics import entropy, free_energy, hls_constant, hls_ratio
from aggdiff.steady import (
    lm_constant, pohozaev_residual, stationarity_residual, unit_origin_potential,
)

p = make_params(3, 1.25)
g = make_grid(60.0, 512, 3)
K = cached_kernel(g, p)

B_cont = ((p.m - 1) / p.m * unit_origin_potential(p)) ** (1 / (p.m - 2))
for lam in (0.5, 1.0, 2.0):
    ss = calibrated_steady(lam, g, p, K)
    print(f"lambda={lam}: B* = {ss.B:.6f}  (continuum {B_cont:.6f}); "
          f"tail mass beyond r_max {ss.tail_mass_fraction:.1e}")

ss = calibrated_steady(1.0, g, p, K)
S = entropy(ss.profile, p)
print(f"||U||_m^m = {S:.6f}; for B = 1 the exact value is pi^2/4 = {lm_constant(p):.6f}")
print(f"max |C - m/(m-1) U^(m-1)| / C(0) = {stationarity_residual(ss, K):.2e}")
print(f"Pohozaev residual / ||U||_m^m    = {pohozaev_residual(ss, K) / S:.2e}")
print(f"F(U) / ||U||_m^m                 = {free_energy(ss.profile, K, p) / S:.5f} (theory 2s/(d-2s) = 5)")
print(f"HLS ratio at U                   = {hls_ratio(ss.profile, K, p):.6f} "
      f"(sharp constant {hls_constant(3, p.beta):.6f})")
