import math

import numpy as np
import pytest
from scipy.integrate import quad

from aggdiff.core import ParameterDomainError, make_grid, make_params, sphere_area
from aggdiff.diagnostics import entropy
from aggdiff.riesz import cached_kernel, potential_at_origin
from aggdiff.steady import (
    IdentityCheckError, calibrate_amplitude, calibrated_steady, lm_constant, pohozaev_residual,
    stationarity_lsq, stationarity_residual, steady_energy, steady_profile, steady_shape,
    unit_origin_potential,
)


def radial_quad(f, d):
    val, _ = quad(lambda r: sphere_area(d) * r ** (d - 1) * f(r), 0, np.inf, limit=400,
                  epsabs=0, epsrel=1e-12)
    return val


def test_lm_constant_closed_forms():
    assert lm_constant(make_params(3, 1.25)) == pytest.approx(math.pi**2 / 4, rel=1e-14)
    assert lm_constant(make_params(4, 1.75)) == pytest.approx(math.pi**2 / 6, rel=1e-14)


@pytest.mark.parametrize("d, s, lam", [(3, 1.25, 1.0), (3, 1.1, 0.3), (4, 1.75, 2.0), (5, 2.2, 1.0)])
def test_lm_constant_against_quadrature(d, s, lam):
    p = make_params(d, s)
    ref = radial_quad(lambda r: steady_shape(r, lam, p) ** p.m, d)
    assert lm_constant(p) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("d, s, lam", [(3, 1.25, 1.0), (3, 1.25, 0.5), (4, 1.75, 1.0)])
def test_unit_origin_potential_against_quadrature(d, s, lam):
    p = make_params(d, s)
    ref = radial_quad(lambda r: r ** -p.beta / p.beta * steady_shape(r, lam, p), d)
    assert unit_origin_potential(p, lam) == pytest.approx(ref, rel=1e-9)


def test_tail_fractions_against_quadrature():
    p = make_params(3, 1.25)
    g = make_grid(20.0, 64, 3)
    ss = steady_profile(1.0, 1.0, g, p)
    shape = lambda r: steady_shape(r, 1.0, p)
    total = radial_quad(shape, 3)
    tail, _ = quad(lambda r: 4 * math.pi * r * r * shape(r), 20.0, np.inf, epsrel=1e-12)
    assert ss.tail_mass_fraction == pytest.approx(tail / total, rel=1e-8)
    tail_m, _ = quad(lambda r: 4 * math.pi * r * r * shape(r) ** p.m, 20.0, np.inf, epsrel=1e-12)
    assert ss.tail_lm_fraction == pytest.approx(tail_m / lm_constant(p), rel=1e-8)


def test_calibration_matches_homogeneity_oracle(ref_grid, ref_params, ref_kernel):
    p = ref_params
    for lam in (0.5, 1.0, 2.0):
        P0 = potential_at_origin(steady_profile(lam, 1.0, ref_grid, p).profile, ref_kernel)
        oracle = ((p.m - 1) / p.m * P0 * lam ** (p.beta / 2)) ** (1 / (p.m - 2))
        assert calibrate_amplitude(lam, ref_grid, p, ref_kernel) == pytest.approx(oracle, rel=1e-12)


def test_calibrated_amplitude_near_continuum(ref_steady, ref_params):
    p = ref_params
    cont = ((p.m - 1) / p.m * unit_origin_potential(p)) ** (1 / (p.m - 2))
    assert ref_steady.B == pytest.approx(cont, rel=1e-2)


def test_amplitude_independent_of_lambda(ref_grid, ref_params, ref_kernel, ref_steady):
    # U(0) lam^((d+2s)/2) is the amplitude B itself
    for lam in (0.5, 2.0):
        B = calibrate_amplitude(lam, ref_grid, ref_params, ref_kernel)
        assert B == pytest.approx(ref_steady.B, rel=1e-2)


def test_profile_is_shell_average(ref_grid, ref_params):
    ss = steady_profile(1.0, 2.0, ref_grid, ref_params)
    assert np.all(np.diff(ss.profile.values) < 0)
    assert ss.profile.values[0] < 2.0
    assert ss.value_at(0.0) == 2.0


def test_residual_decreases_under_refinement():
    p = make_params(3, 1.25)
    res = []
    for n in (128, 256):
        g = make_grid(60.0, n, 3)
        K = cached_kernel(g, p)
        res.append(stationarity_residual(calibrated_steady(1.0, g, p, K), K))
    assert res[1] < 0.5 * res[0]


def test_reference_identities(ref_steady, ref_kernel, ref_params):
    S = entropy(ref_steady.profile, ref_params)
    assert stationarity_residual(ref_steady, ref_kernel) < 1e-2
    assert stationarity_lsq(ref_steady, ref_kernel) < stationarity_residual(ref_steady, ref_kernel)
    assert abs(pohozaev_residual(ref_steady, ref_kernel)) / S < 1e-3
    assert steady_energy(ref_steady, ref_kernel) == pytest.approx(5 * S, rel=1e-2)


def test_steady_energy_rejects_wrong_amplitude(ref_steady, ref_kernel):
    wrong = steady_profile(1.0, 2 * ref_steady.B, ref_steady.grid, ref_steady.params)
    with pytest.raises(IdentityCheckError):
        steady_energy(wrong, ref_kernel)


def test_potential_amplitude(ref_steady, ref_params):
    assert ref_steady.potential_at(0.0) == pytest.approx(ref_steady.A)
    assert ref_steady.A == pytest.approx(12 * ref_steady.B ** (1 / 11))


def test_domain_errors(small_kernel):
    p = make_params(3, 1.25)
    g = small_kernel.grid
    with pytest.raises(ParameterDomainError):
        steady_profile(0.0, 1.0, g, p)
    with pytest.raises(ParameterDomainError):
        steady_profile(1.0, -1.0, g, p)
    with pytest.raises(ParameterDomainError):
        calibrate_amplitude(1.0, g, make_params(3, 1.25, 0.1), small_kernel)
