"""The acceptance suite: every identity and dynamical check in one place.

Each check returns a :class:`Criterion`; :func:`run_suite` evaluates all of
them for one parameter pair and grid.  The command-line ``verify`` and the
test suite both go through here, so they can never disagree about what
"passing" means.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .core import Profile, make_grid, make_params
from .diagnostics import (
    amplitude_energy, blowup_margin, entropy, free_energy, hls_constant,
    hls_ratio, moment_rhs,
)
from .io import csv_text
from .riesz import KernelMatrix, cached_kernel
from .solver import (
    Event, InitialData, SimConfig, Trajectory, energy_dissipation_check, make_state, run, step,
)
from .steady import (
    SteadyState, calibrated_steady, lm_constant, pohozaev_residual, stationarity_residual,
    steady_profile,
)

# declared tolerances, one per check
LM_RTOL = 1e-3
LAMBDA_RTOL = 1e-3
RESIDUAL_TOL = 1e-2
RESIDUAL_FINE_TOL = 2.5e-3
POHOZAEV_TOL = 1e-3
POHOZAEV_CONTROL_MIN = 0.1
ENERGY_RTOL = 1e-2
HLS_RTOL = 1e-2
HLS_SLACK = 1e-8
MASS_RTOL = 1e-10
DISSIPATION_SLACK = 1e-6
MOMENT_RTOL = 5e-2
MOMENT_STEADY_TOL = 1e-2
DRIFT_TOL = 1e-2


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.number:>2} {self.name}: {self.value:.3e} (tol {self.tolerance:.1e}) {self.detail}"


@dataclass(frozen=True)
class SuiteConfig:
    d: int = 3
    s: float = 1.25
    lam: float = 1.0
    r_max: float = 60.0
    n: int = 512
    cfl: float = 0.4
    refine: int = 2
    kappas_sub: tuple = (0.6, 0.8, 0.9)
    kappas_super: tuple = (1.1, 1.2, 1.5)
    t_end: float = 10.0
    sample_dt: float = 0.05
    moment_kappa: float = 0.8
    moment_t_end: float = 0.5
    moment_sample_dt: float = 0.02
    drift_steps: int = 1000
    hls_samples: int = 100
    seed: int = 20240601
    workers: int = 1

    def sim(self, kappa: float, **kw) -> SimConfig:
        base = dict(d=self.d, s=self.s, r_max=self.r_max, n=self.n, cfl=self.cfl,
                    initial=InitialData("steady", kappa=kappa, lam=self.lam),
                    t_end=self.t_end, sample_dt=self.sample_dt)
        base.update(kw)
        return SimConfig(**base)


class Suite:
    """Lazily built kernels and steady states shared by all checks."""

    def __init__(self, cfg: SuiteConfig):
        self.cfg = cfg
        self.params = make_params(cfg.d, cfg.s)
        self._kernels: dict[int, KernelMatrix] = {}
        self._steady: dict[tuple, SteadyState] = {}
        self._runs: dict[tuple, Trajectory] = {}

    def kernel(self, n: int | None = None) -> KernelMatrix:
        n = self.cfg.n if n is None else n
        if n not in self._kernels:
            grid = make_grid(self.cfg.r_max, n, self.cfg.d)
            self._kernels[n] = cached_kernel(grid, self.params)
        return self._kernels[n]

    def steady(self, n: int | None = None, lam: float | None = None) -> SteadyState:
        n = self.cfg.n if n is None else n
        lam = self.cfg.lam if lam is None else lam
        if (n, lam) not in self._steady:
            K = self.kernel(n)
            self._steady[n, lam] = calibrated_steady(lam, K.grid, self.params, K)
        return self._steady[n, lam]

    def scan(self) -> dict[float, Trajectory]:
        kappas = tuple(self.cfg.kappas_sub) + tuple(self.cfg.kappas_super)
        missing = [k for k in kappas if ("scan", k) not in self._runs]
        if missing:
            cfgs = [self.cfg.sim(k) for k in missing]
            for k, tr in zip(missing, run_many(cfgs, self.kernel(), self.cfg.workers)):
                self._runs["scan", k] = tr
        return {k: self._runs["scan", k] for k in kappas}

    def moment_run(self, n: int | None = None) -> Trajectory:
        n = self.cfg.n if n is None else n
        key = ("moment", n)
        if key not in self._runs:
            c = self.cfg
            sim = c.sim(c.moment_kappa, n=n, t_end=c.moment_t_end, sample_dt=c.moment_sample_dt)
            self._runs[key] = run(sim, self.kernel(n))
        return self._runs[key]

    def all_runs(self) -> list[Trajectory]:
        self.scan()
        self.moment_run()
        return list(self._runs.values())


def _run_one(args):
    cfg, K = args
    return run(cfg, K)


def run_many(cfgs: list[SimConfig], K: KernelMatrix, workers: int = 1) -> list[Trajectory]:
    """Run independent simulations, in worker processes when ``workers > 1``.

    Each run is sequential and self-contained, so the results do not depend
    on scheduling; they are returned in input order.
    """
    if workers <= 1 or len(cfgs) <= 1:
        return [run(c, K) for c in cfgs]
    with ProcessPoolExecutor(max_workers=min(workers, len(cfgs))) as pool:
        return list(pool.map(_run_one, [(c, K) for c in cfgs]))


# individual checks -----------------------------------------------------------

def check_lm_constant(suite: Suite) -> Criterion:
    c, p = suite.cfg, suite.params
    exact = lm_constant(p)
    errs = []
    for n in (c.n, c.refine * c.n):
        grid = make_grid(c.r_max, n, c.d)
        S = entropy(steady_profile(c.lam, 1.0, grid, p).profile, p)
        errs.append(abs(S - exact) / exact)
    grid = make_grid(c.r_max, c.n, c.d)
    S_lam = {lam: entropy(steady_profile(lam, 1.0, grid, p).profile, p)
             for lam in (c.lam, 0.5 * c.lam, 2.0 * c.lam)}
    ref = S_lam[c.lam]
    # the two off-reference scales must agree with each other, and each with lambda
    pair = abs(S_lam[0.5 * c.lam] - S_lam[2.0 * c.lam]) / ref
    spread = max(abs(S_lam[0.5 * c.lam] - ref), abs(S_lam[2.0 * c.lam] - ref)) / ref
    ok = errs[0] <= LM_RTOL and errs[1] < errs[0] and max(pair, spread) <= LAMBDA_RTOL
    return Criterion(1, "L^m constant", ok, errs[0], LM_RTOL,
                     f"exact {exact:.6f}; refined error {errs[1]:.2e}; "
                     f"lambda/2 vs 2 lambda: {pair:.2e}, vs lambda={c.lam:g}: {spread:.2e} "
                     f"(tol {LAMBDA_RTOL:.0e})")


def check_residual(suite: Suite) -> Criterion:
    c = suite.cfg
    res = stationarity_residual(suite.steady(), suite.kernel())
    fine_n = c.refine * c.n
    res_fine = stationarity_residual(suite.steady(fine_n), suite.kernel(fine_n))
    ok = res <= RESIDUAL_TOL and res_fine <= RESIDUAL_FINE_TOL
    return Criterion(2, "steady self-consistency", ok, res, RESIDUAL_TOL,
                     f"n={fine_n}: {res_fine:.2e} (tol {RESIDUAL_FINE_TOL:.1e}); B*={suite.steady().B:.6f}")


def check_pohozaev(suite: Suite) -> Criterion:
    ss, K, p = suite.steady(), suite.kernel(), suite.params
    S = entropy(ss.profile, p)
    rel = abs(pohozaev_residual(ss, K)) / S
    doubled = steady_profile(ss.lam, 2.0 * ss.B, ss.grid, p)
    ctrl = abs(pohozaev_residual(doubled, K)) / entropy(doubled.profile, p)
    ok = rel <= POHOZAEV_TOL and ctrl >= POHOZAEV_CONTROL_MIN
    return Criterion(3, "Pohozaev identity", ok, rel, POHOZAEV_TOL,
                     f"doubled-B control {ctrl:.3f} (min {POHOZAEV_CONTROL_MIN})")


def check_energy(suite: Suite) -> Criterion:
    ss, K, p = suite.steady(), suite.kernel(), suite.params
    ratio = free_energy(ss.profile, K, p) / entropy(ss.profile, p)
    target = 2.0 * p.s / p.beta
    rel = abs(ratio - target) / target
    return Criterion(4, "steady free energy", rel <= ENERGY_RTOL, rel, ENERGY_RTOL,
                     f"F/||U||_m^m = {ratio:.6f}, target {target:g}")


def random_profiles(grid, count: int, seed: int):
    """Nonnegative test densities: bumps, shells, steps and white noise."""
    rng = np.random.default_rng(seed)
    r = grid.centers
    for k in range(count):
        kind = k % 4
        if kind == 0:
            a, w, r0 = rng.uniform(0.1, 5), rng.uniform(0.2, 10), rng.uniform(0, 20)
            v = a * np.exp(-((r - r0) / w) ** 2)
        elif kind == 1:
            lo = rng.uniform(0, 30)
            v = np.where((r > lo) & (r < lo + rng.uniform(0.5, 20)), rng.uniform(0.1, 3), 0.0)
        elif kind == 2:
            v = rng.uniform(0.1, 3) * (1.0 + r / rng.uniform(0.3, 5)) ** -rng.uniform(3.5, 8)
        else:
            v = rng.uniform(0, 1, grid.n) * (r < rng.uniform(1, 60))
        if not np.any(v > 0):
            v = np.exp(-r * r)
        yield Profile(grid, v)


def check_hls(suite: Suite) -> Criterion:
    c, ss, K, p = suite.cfg, suite.steady(), suite.kernel(), suite.params
    C = hls_constant(p.d, p.beta)
    ratio = hls_ratio(ss.profile, K, p)
    rel = abs(ratio - C) / C
    worst = min((C - hls_ratio(u, K, p)) / C for u in random_profiles(K.grid, c.hls_samples, c.seed))
    ok = rel <= HLS_RTOL and worst >= -HLS_SLACK
    return Criterion(5, "HLS sharpness", ok, rel, HLS_RTOL,
                     f"C={C:.10f}; min slack over {c.hls_samples} random profiles {worst:.3e}")


def check_conservation(suite: Suite) -> Criterion:
    runs = suite.all_runs()
    worst_mass, worst_jump, dissipating = 0.0, -math.inf, 0
    for tr in runs:
        M = tr.column("mass")
        if M[0] > 0:
            worst_mass = max(worst_mass, float(np.max(np.abs(M - M[0]))) / M[0])
        rep = energy_dissipation_check(tr, DISSIPATION_SLACK * abs(tr.rows[0].free_energy))
        F = tr.column("free_energy")
        jump = float(np.max(np.diff(F))) / abs(F[0]) if F[0] != 0 else 0.0
        worst_jump = max(worst_jump, jump)
        dissipating += rep.passed
    ok = worst_mass <= MASS_RTOL and dissipating == len(runs)
    return Criterion(6, "mass and dissipation", ok, worst_mass, MASS_RTOL,
                     f"{len(runs)} runs; largest F increase / |F0| = {worst_jump:.2e} "
                     f"(slack {DISSIPATION_SLACK:.0e})")


def moment_error(tr: Trajectory) -> float:
    """Largest relative mismatch between the centred difference of m2 and the virial right side."""
    t = tr.column("t")
    m2 = tr.column("second_moment")
    rhs = tr.column("moment_rhs")
    if t.size < 3:
        return math.inf
    d = (m2[2:] - m2[:-2]) / (t[2:] - t[:-2])
    return float(np.max(np.abs(d - rhs[1:-1]) / np.abs(rhs[1:-1])))


def check_moment(suite: Suite) -> Criterion:
    c, p = suite.cfg, suite.params
    err = moment_error(suite.moment_run())
    fine_n = c.refine * c.n
    err_fine = moment_error(suite.moment_run(fine_n))
    ss = suite.steady()
    at_steady = abs(moment_rhs(ss.profile, suite.kernel(), p)) / (4.0 * p.s * entropy(ss.profile, p))
    ok = err <= MOMENT_RTOL and err_fine < err and at_steady <= MOMENT_STEADY_TOL
    return Criterion(7, "second-moment identity", ok, err, MOMENT_RTOL,
                     f"kappa={c.moment_kappa:g}; n={fine_n}: {err_fine:.2e}; "
                     f"at U: {at_steady:.2e} (tol {MOMENT_STEADY_TOL:.0e})")


def classify_runs(ss: SteadyState, K: KernelMatrix, runs: dict[float, Trajectory]) -> list[dict]:
    """One row per kappa: prediction from the initial data, outcome from the run."""
    p = ss.params
    S = entropy(ss.profile, p)
    lms = S ** (1.0 / p.m)
    F_s = free_energy(ss.profile, K, p)
    law_s = float(amplitude_energy(1.0, S, p))
    rows = []
    for kappa, tr in runs.items():
        u0 = ss.profile.scaled(kappa)
        margin = blowup_margin(u0, ss, K)
        lm = tr.column("lm_norm")
        m2 = tr.column("second_moment")
        rows.append(dict(
            kappa=kappa,
            lm_ratio=margin.lm_ratio,
            energy_ratio=margin.energy_ratio,
            below_steady_energy=bool(free_energy(u0, K, p) < F_s
                                     and float(amplitude_energy(kappa, S, p)) < law_s),
            predicted=margin.prediction,
            observed=tr.event,
            t_star=tr.t_star,
            sup_lm_ratio=float(lm.max() / lms),
            m2_decreasing=bool(np.all(np.diff(m2) < 0.0)),
            lm_grew=bool(lm.max() > lm[0]),
        ))
    return rows


def dichotomy_rows(suite: Suite) -> list[dict]:
    return classify_runs(suite.steady(), suite.kernel(), suite.scan())


def check_dichotomy(suite: Suite) -> Criterion:
    c = suite.cfg
    bad = []
    for row in dichotomy_rows(suite):
        k = row["kappa"]
        if not row["below_steady_energy"]:
            bad.append(f"{k:g}: F(u0) >= F(U)")
        if k in c.kappas_sub:
            if row["observed"] is not Event.REACHED_T_END or not row["sup_lm_ratio"] < 1.0:
                bad.append(f"{k:g}: {row['observed'].value}, sup ratio {row['sup_lm_ratio']:.4f}")
        else:
            if row["observed"] is not Event.BLOWUP or not row["m2_decreasing"]:
                bad.append(f"{k:g}: {row['observed'].value}, m2 decreasing {row['m2_decreasing']}")
    n = len(c.kappas_sub) + len(c.kappas_super)
    return Criterion(8, "dichotomy", not bad, float(len(bad)), 0.0,
                     "; ".join(bad) if bad else f"{n} runs classified as predicted")


def stationarity_drift(suite: Suite, steps: int | None = None) -> float:
    c, K, p = suite.cfg, suite.kernel(), suite.params
    steps = c.drift_steps if steps is None else steps
    U = suite.steady().profile
    state = make_state(0.0, U, K, p)
    top = float(U.values.max())
    drift = 0.0
    for _ in range(steps):
        state = step(state, K, p, c.cfl)
        drift = max(drift, float(np.max(np.abs(state.u.values - U.values))) / top)
    return drift


def check_drift(suite: Suite) -> Criterion:
    c = suite.cfg
    drift = stationarity_drift(suite)
    return Criterion(9, "stationarity under flow", drift <= DRIFT_TOL, drift, DRIFT_TOL,
                     f"{c.drift_steps} steps at cfl {c.cfl:g}")


def reproducibility_digest(cfg: SuiteConfig) -> str:
    """A short deterministic pipeline rendered to CSV text: steady profile plus a short run."""
    suite = Suite(cfg)
    ss, K = suite.steady(), suite.kernel()
    c = K.apply(ss.profile.values)
    tr = run(cfg.sim(cfg.moment_kappa, t_end=cfg.moment_t_end, sample_dt=cfg.moment_sample_dt), K)
    a = csv_text(("r", "u", "c"), zip(K.grid.centers.tolist(), ss.profile.values.tolist(), c.tolist()))
    b = csv_text(tuple(tr.rows[0].as_dict()), (tuple(r.as_dict().values()) for r in tr.rows))
    return a + b


def check_determinism(suite: Suite) -> Criterion:
    cfg = replace(suite.cfg, workers=1)
    first = reproducibility_digest(cfg)
    second = reproducibility_digest(cfg)
    same = first == second
    return Criterion(10, "determinism", same, 0.0 if same else 1.0, 0.0,
                     "repeated pipeline renders byte-identical CSV" if same
                     else "repeated pipeline differs")


CHECKS: tuple[Callable[[Suite], Criterion], ...] = (
    check_lm_constant, check_residual, check_pohozaev, check_energy, check_hls,
    check_conservation, check_moment, check_dichotomy, check_drift, check_determinism,
)


def safe_check(fn: Callable[[Suite], Criterion], suite: Suite, number: int) -> Criterion:
    """Run one check; an exception counts as a failure of that check, not of the suite."""
    try:
        return fn(suite)
    except Exception as exc:  # noqa: BLE001 - reported, not swallowed
        name = fn.__name__.removeprefix("check_").replace("_", " ")
        return Criterion(number, name, False, math.nan, math.nan, f"{type(exc).__name__}: {exc}")


def run_suite(cfg: SuiteConfig, report: Callable[[Criterion], None] | None = None) -> list[Criterion]:
    suite = Suite(cfg)
    out = []
    for i, fn in enumerate(CHECKS, start=1):
        res = safe_check(fn, suite, i)
        out.append(res)
        if report is not None:
            report(res)
    return out
