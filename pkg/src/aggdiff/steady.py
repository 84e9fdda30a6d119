"""The explicit steady-state family and its calibration.

At the energy-critical exponent the stationary densities are

    U(r) = B * (lam / (lam^2 + r^2))^((d+2s)/2),

with potential ``C = m/(m-1) * U^(m-1)``.  The amplitude ``B`` is not given
in closed form by the theory used here, so :func:`calibrate_amplitude` pins
it numerically by matching the two sides of that relation at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect
from scipy.special import betainc, betaln

from .core import ModelParams, ParameterDomainError, Profile, RadialGrid, integrate, sphere_area
from .riesz import KernelMatrix, interaction_energy, potential, potential_at_origin


class CalibrationError(RuntimeError):
    """The amplitude root could not be bracketed."""


class IdentityCheckError(AssertionError):
    """A steady-state identity failed its declared tolerance."""


def steady_shape(r, lam: float, params: ModelParams):
    """Unit-amplitude profile ``(lam/(lam^2 + r^2))^((d+2s)/2)``."""
    r = np.asarray(r, dtype=float)
    return (lam / (lam * lam + r * r)) ** (0.5 * (params.d + 2.0 * params.s))


def lm_constant(params: ModelParams, B: float = 1.0) -> float:
    """Exact ``||U||_{L^m}^m = B^m omega_d Beta(d/2, d/2) / 2``, independent of lambda.

    Equal to ``B^m pi^((d+1)/2) 2^(1-d) / Gamma((d+1)/2)``.
    """
    d = params.d
    return B**params.m * sphere_area(d) * 0.5 * np.exp(betaln(0.5 * d, 0.5 * d))


def unit_origin_potential(params: ModelParams, lam: float = 1.0) -> float:
    """Exact potential at r = 0 of the unit-amplitude profile (epsilon = 0)."""
    d, s = params.d, params.s
    return (sphere_area(d) * 0.5 * np.exp(betaln(s, 0.5 * d)) / params.beta
            * lam ** (-0.5 * params.beta))


@dataclass
class SteadyState:
    lam: float
    B: float
    params: ModelParams
    profile: Profile
    tail_mass_fraction: float
    tail_lm_fraction: float

    @property
    def A(self) -> float:
        """Potential amplitude ``m/(m-1) B^(m-1)``."""
        return self.params.entropy_factor * self.B ** (self.params.m - 1.0)

    @property
    def grid(self) -> RadialGrid:
        return self.profile.grid

    def value_at(self, r):
        return self.B * steady_shape(r, self.lam, self.params)

    def potential_at(self, r):
        """Continuum potential ``A (lam/(lam^2+r^2))^((d-2s)/2)``."""
        r = np.asarray(r, dtype=float)
        return self.A * (self.lam / (self.lam**2 + r * r)) ** (0.5 * self.params.beta)


def _tail_fractions(lam, r_max, params):
    # with t = r^2/(lam^2 + r^2) the radial integrals become incomplete betas
    t = r_max**2 / (lam**2 + r_max**2)
    d, s = params.d, params.s
    mass = 1.0 - betainc(0.5 * d, s, t)
    lm = 1.0 - betainc(0.5 * d, 0.5 * d, t)
    return float(mass), float(lm)


def steady_profile(lam: float, B: float, grid: RadialGrid, params: ModelParams,
                   average: bool = True) -> SteadyState:
    """Render ``U = B (lam/(lam^2+r^2))^((d+2s)/2)`` on ``grid``.

    Values are shell averages unless ``average=False``.  The fractions of
    mass and of ``int U^m`` lying beyond ``r_max`` are reported alongside.
    """
    if not lam > 0.0:
        raise ParameterDomainError(f"lambda must be positive, got {lam}")
    if not B > 0.0:
        raise ParameterDomainError(f"amplitude must be positive, got {B}")
    prof = Profile.from_function(grid, lambda r: B * steady_shape(r, lam, params), average)
    tm, tl = _tail_fractions(lam, grid.r_max, params)
    return SteadyState(float(lam), float(B), params, prof, tm, tl)


def calibrate_amplitude(lam: float, grid: RadialGrid, params: ModelParams,
                        K: KernelMatrix, average: bool = True) -> float:
    """Amplitude ``B*`` for which the rendered profile is stationary at r = 0.

    Solves ``g(B) = m/(m-1) B^(m-1) lam^(-(d-2s)/2) - B P0 = 0`` by bisection
    in ``log B``, where ``P0`` is the discrete potential at the origin of the
    unit-amplitude profile.
    """
    if params.epsilon != 0.0 or K.params.epsilon != 0.0:
        raise ParameterDomainError("calibration needs the unregularized kernel (epsilon = 0)")
    unit = steady_profile(lam, 1.0, grid, params, average).profile
    P0 = potential_at_origin(unit, K)
    m = params.m
    # continuum U^(m-1) at the origin per unit B^(m-1)
    shape0 = lam ** (-0.5 * params.beta)

    def g(logB):
        B = np.exp(logB)
        # g(B) / B^(m-1): same sign, better scaled
        return params.entropy_factor * shape0 - B ** (2.0 - m) * P0

    lo, hi = -1.0, 1.0
    for _ in range(200):
        if g(lo) > 0.0 > g(hi):
            break
        lo, hi = 2.0 * lo, 2.0 * hi
        if hi > 1e3:
            raise CalibrationError(f"amplitude root not bracketed (P0 = {P0!r})")
    else:
        raise CalibrationError(f"amplitude root not bracketed (P0 = {P0!r})")
    logB = bisect(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=400)
    return float(np.exp(logB))


def calibrated_steady(lam: float, grid: RadialGrid, params: ModelParams,
                      K: KernelMatrix, average: bool = True) -> SteadyState:
    B = calibrate_amplitude(lam, grid, params, K, average)
    return steady_profile(lam, B, grid, params, average)


def stationarity_residual(ss: SteadyState, K: KernelMatrix) -> float:
    """``max_i |C_i - m/(m-1) U_i^(m-1)| / C(0)`` on the discrete state."""
    u = ss.profile
    c = potential(u, K).values
    c0 = potential_at_origin(u, K)
    return float(np.max(np.abs(c - ss.params.entropy_factor * u.values ** (ss.params.m - 1.0))) / c0)


def stationarity_lsq(ss: SteadyState, K: KernelMatrix) -> float:
    """Mass-weighted RMS of the same residual (diagnostic only)."""
    u = ss.profile
    c = potential(u, K).values
    r = c - ss.params.entropy_factor * u.values ** (ss.params.m - 1.0)
    c0 = potential_at_origin(u, K)
    return float(np.sqrt(integrate(u, lambda v: v * 0.0 + r**2 * v) / integrate(u)) / c0)


def pohozaev_residual(ss: SteadyState, K: KernelMatrix) -> float:
    """``int U^m - (d-2s)/(2d) int C U``; zero for a true steady state."""
    p = ss.params
    Sm = integrate(ss.profile, lambda v: v**p.m)
    cu = 2.0 * interaction_energy(ss.profile, K)
    return Sm - p.beta / (2.0 * p.d) * cu


def steady_energy(ss: SteadyState, K: KernelMatrix, rtol: float = 1e-2) -> float:
    """Free energy of the steady state, checked against ``2s/(d-2s) ||U||_m^m``."""
    p = ss.params
    Sm = integrate(ss.profile, lambda v: v**p.m)
    F = Sm / (p.m - 1.0) - interaction_energy(ss.profile, K)
    target = 2.0 * p.s / p.beta * Sm
    if not abs(F - target) <= rtol * abs(target):
        raise IdentityCheckError(
            f"F(U) = {F!r} but 2s/(d-2s) ||U||_m^m = {target!r} (rtol {rtol})")
    return F
