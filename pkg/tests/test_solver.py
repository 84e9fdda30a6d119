import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from aggdiff import solver
from aggdiff.core import Profile, make_grid, make_params
from aggdiff.diagnostics import entropy
from aggdiff.riesz import assemble_kernel, cached_kernel
from aggdiff.solver import (
    Event, InitialData, InitialDataError, SchemeIntegrityError, SimConfig, chemical_potential,
    default_linf_threshold, energy_dissipation_check, make_state, run, steady_residual, step,
)
from aggdiff.steady import calibrated_steady


def test_zero_state_unchanged(small_kernel):
    p = small_kernel.params
    u = Profile(small_kernel.grid, np.zeros(small_kernel.grid.n))
    st_ = make_state(0.0, u, small_kernel, p)
    nxt = step(st_, small_kernel, p, dt_max=0.1)
    assert np.array_equal(nxt.u.values, u.values)
    assert nxt.t == pytest.approx(0.1)
    with pytest.raises(ValueError):
        step(st_, small_kernel, p)


def test_chemical_potential_limits(small_kernel):
    p = small_kernel.params
    g = small_kernel.grid
    assert np.all(chemical_potential(Profile(g, np.zeros(g.n)), small_kernel, p) == 0.0)
    u = Profile.from_function(g, lambda r: np.exp(-r * r))
    mu = chemical_potential(u, small_kernel.zeroed(), p)
    assert np.array_equal(mu, p.entropy_factor * u.values ** (p.m - 1))


def test_chemical_potential_flat_at_steady(ref_steady, ref_kernel, ref_params):
    mu = chemical_potential(ref_steady.profile, ref_kernel, ref_params)
    c0 = ref_kernel.origin_row @ (ref_steady.profile.values * ref_kernel.grid.vol)
    assert np.max(np.abs(mu)) / c0 < 1e-2


@pytest.mark.parametrize("scheme", ["muscl", "upwind"])
def test_mass_and_positivity_random_data(small_kernel, scheme):
    p = small_kernel.params
    g = small_kernel.grid

    @settings(max_examples=25, deadline=None)
    @given(arrays(np.float64, g.n, elements=st.floats(0, 20, allow_nan=False))
           .filter(lambda v: v.max() > 1e-2))
    def check(v):
        state = make_state(0.0, Profile(g, v), small_kernel, p)
        M0 = float(v @ g.vol)
        for k in range(1, 31):
            state = step(state, small_kernel, p, 0.4, scheme=scheme)
            assert np.all(state.u.values >= 0.0)
            assert abs(state.u.values @ g.vol - M0) <= 1e-12 * M0 * k

    check()


def test_regularized_run_conserves_mass():
    cfg = SimConfig(epsilon=0.5, r_max=30.0, n=96, initial=InitialData(kappa=0.8), t_end=0.5,
                    sample_dt=0.1)
    tr = run(cfg)
    M = tr.column("mass")
    assert np.max(np.abs(M - M[0])) <= 1e-12 * M[0] * tr.steps
    assert tr.event is Event.REACHED_T_END


def test_integrity_error_on_negative_density(small_kernel, monkeypatch):
    p = small_kernel.params
    g = small_kernel.grid
    state = make_state(0.0, Profile.from_function(g, lambda r: 3 * np.exp(-r * r)), small_kernel, p)
    monkeypatch.setattr(solver, "stable_dt", lambda *a, **k: 1e3)
    with pytest.raises(SchemeIntegrityError):
        step(state, small_kernel, p)


def _coarsen(fine: np.ndarray, vol_f: np.ndarray, factor: int) -> np.ndarray:
    m = (fine * vol_f).reshape(-1, factor).sum(axis=1)
    return m / vol_f.reshape(-1, factor).sum(axis=1)


def test_porous_medium_order_of_accuracy():
    # pure porous-medium flow (interaction switched off) from a Gaussian,
    # compared with a fine-grid self-reference
    p = make_params(3, 1.25)
    r_max, n_fine, t_end = 3.0, 512, 0.02
    init = InitialData("gaussian", amplitude=1.0, width=0.6)

    def solve(n):
        K = assemble_kernel(make_grid(r_max, n, 3), p, order=8).zeroed()
        cfg = SimConfig(r_max=r_max, n=n, initial=init, t_end=t_end, sample_dt=t_end)
        return run(cfg, K).final.u.values, K.grid

    ref, gf = solve(n_fine)
    errs = []
    for n in (32, 64, 128):
        u, g = solve(n)
        errs.append(np.sum(np.abs(u - _coarsen(ref, gf.vol, n_fine // n)) * g.vol))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.0), (errs, orders)


def test_stationarity_refined():
    # at n = 1024 the calibrated profile stays within 1 % over 1000 steps
    p = make_params(3, 1.25)
    g = make_grid(60.0, 1024, 3)
    K = cached_kernel(g, p)
    U = calibrated_steady(1.0, g, p, K).profile
    state = make_state(0.0, U, K, p)
    drift = 0.0
    for _ in range(1000):
        state = step(state, K, p, 0.4)
        drift = max(drift, np.max(np.abs(state.u.values - U.values)) / U.values.max())
    assert drift < 1e-2


def test_zero_amplitude_run(small_kernel):
    cfg = SimConfig(r_max=30.0, n=96, initial=InitialData(kappa=0.0), t_end=0.3, sample_dt=0.1)
    tr = run(cfg, small_kernel)
    assert tr.event is Event.REACHED_T_END
    assert len(tr.rows) == 4
    for row in tr.rows:
        assert all(v == 0.0 for k, v in row.as_dict().items() if k not in ("t", "dissipation"))
    rep = energy_dissipation_check(tr)
    assert rep.max_jump == 0.0 and rep.passed


@pytest.fixture(scope="module")
def subcritical(ref_kernel):
    cfg = SimConfig(initial=InitialData(kappa=0.8), t_end=2.0, sample_dt=0.05, snapshot_every=10)
    return run(cfg, ref_kernel)


@pytest.fixture(scope="module")
def supercritical(ref_kernel):
    cfg = SimConfig(initial=InitialData(kappa=1.2), t_end=10.0, sample_dt=0.05)
    return run(cfg, ref_kernel)


def test_subcritical_run(subcritical, ref_steady, ref_params):
    tr = subcritical
    assert tr.event is Event.REACHED_T_END
    assert tr.rows[-1].t == pytest.approx(2.0)
    t = tr.column("t")
    assert np.all(np.diff(t) > 0)
    lms = entropy(ref_steady.profile, ref_params) ** (1 / ref_params.m)
    assert tr.column("lm_norm").max() < lms
    rep = energy_dissipation_check(tr)
    assert rep.passed, rep
    assert len(tr.snapshots) == 5


def test_supercritical_run(supercritical):
    tr = supercritical
    assert tr.event is Event.BLOWUP
    assert tr.t_star is not None and tr.t_star < 10.0
    assert np.all(np.diff(tr.column("second_moment")) < 0)
    lm = tr.column("lm_norm")
    assert lm.max() > lm[0]
    assert tr.final.u.values.max() > tr.linf_threshold
    assert energy_dissipation_check(tr).passed


def test_dissipation_matches_energy_decay(subcritical):
    # dF/dt = -int u |grad mu|^2 along the flow, up to time discretization
    tr = subcritical
    F = tr.column("free_energy")
    t = tr.column("t")
    D = tr.column("dissipation")
    dF = np.diff(F) / np.diff(t)
    assert np.allclose(-dF[5:], D[6:], rtol=0.1)


def test_default_threshold_caps_at_grid_capacity(ref_steady):
    u0 = ref_steady.profile.scaled(1.2)
    thr = default_linf_threshold(u0)
    cap = 0.5 * (u0.values @ u0.grid.vol) / u0.grid.vol[0]
    assert thr == pytest.approx(min(1e3 * u0.values.max(), cap))
    assert thr < 1e3 * u0.values.max()
    assert default_linf_threshold(u0.scaled(0.0)) == math.inf


def test_explicit_thresholds_respected(ref_kernel):
    cfg = SimConfig(initial=InitialData(kappa=1.2), t_end=10.0, blowup_linf_threshold=10.0)
    tr = run(cfg, ref_kernel)
    assert tr.event is Event.BLOWUP
    assert tr.linf_threshold == 10.0


def test_steady_residual_zero_profile(small_kernel):
    g = small_kernel.grid
    st_ = make_state(0.0, Profile(g, np.zeros(g.n)), small_kernel, small_kernel.params)
    assert steady_residual(st_) == 0.0


def test_file_initial_data(tmp_path, small_kernel):
    g = small_kernel.grid
    path = tmp_path / "u0.csv"
    r = np.linspace(0, 10, 50)
    np.savetxt(path, np.column_stack([r, np.exp(-r)]), delimiter=",", header="r,u", comments="")
    cfg = SimConfig(r_max=30.0, n=96, initial=InitialData("file", path=str(path)), t_end=0.1)
    u0 = solver.initial_profile(cfg, g, small_kernel)
    assert u0.values[0] == pytest.approx(np.exp(-g.centers[0]), rel=1e-2)
    assert np.all(u0.values[g.centers > 10] == 0)
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n0,1\n1,2\n")
    with pytest.raises(InitialDataError):
        solver.initial_profile(SimConfig(initial=InitialData("file", path=str(bad))), g, small_kernel)


@pytest.mark.parametrize("kw", [
    dict(kind="nope"), dict(kind="steady", kappa=-1.0), dict(kind="gaussian", width=0.0),
    dict(kind="file"),
])
def test_initial_data_validation(kw):
    with pytest.raises(InitialDataError):
        InitialData(**kw)


@pytest.mark.parametrize("kw", [
    dict(cfl=1.0), dict(cfl=0.0), dict(t_end=-1.0), dict(dt_floor=0.0),
    dict(blowup_linf_threshold=-2.0), dict(scheme="weno"),
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_dissipation_check_needs_two_samples(small_kernel):
    cfg = SimConfig(r_max=30.0, n=96, initial=InitialData(kappa=0.0), t_end=0.1, sample_dt=0.1)
    tr = run(cfg, small_kernel)
    tr.rows = tr.rows[:1]
    with pytest.raises(ValueError):
        energy_dissipation_check(tr)
