"""Explicit upwind finite-volume gradient flow on radial profiles.

The equation is written as ``u_t = div(u grad mu)`` with chemical potential
``mu = m/(m-1) u^(m-1) - c``.  Each step computes the edge velocity
``v = -d mu/dr``, transports the upwind density through the shell surfaces
and applies forward Euler.  The upwind density is either the cell value
(``scheme="upwind"``, first order) or a minmod-limited face value
(``scheme="muscl"``, the default).  Fluxes telescope, so mass is conserved to
round-off; with the time step below every cell update is a convex
combination and densities stay nonnegative.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import ModelParams, Profile, RadialGrid, integrate, make_grid, make_params
from .diagnostics import DiagnosticRow, diagnostic_row
from .riesz import KernelMatrix, cached_kernel
from .steady import calibrated_steady

log = logging.getLogger(__name__)


SCHEMES = ("muscl", "upwind")


class SchemeIntegrityError(RuntimeError):
    """NaN or negative density produced by the scheme."""


class InitialDataError(ValueError):
    pass


class Event(str, Enum):
    REACHED_T_END = "ReachedTEnd"
    BLOWUP = "BlowupDetected"
    STEADY = "SteadyDetected"


@dataclass(frozen=True)
class InitialData:
    """One of ``steady`` (kappa times the calibrated U at scale lam),
    ``gaussian`` (amplitude * exp(-r^2/width^2)) or ``file`` (CSV with
    columns r,u interpolated onto the grid)."""

    kind: str = "steady"
    kappa: float = 1.0
    lam: float = 1.0
    amplitude: float = 1.0
    width: float = 1.0
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("steady", "gaussian", "file"):
            raise InitialDataError(f"unknown initial-data kind {self.kind!r}")
        if self.kind == "steady" and not (self.kappa >= 0.0 and self.lam > 0.0):
            raise InitialDataError("steady initial data needs kappa >= 0 and lam > 0")
        if self.kind == "gaussian" and not (self.amplitude >= 0.0 and self.width > 0.0):
            raise InitialDataError("gaussian initial data needs amplitude >= 0 and width > 0")
        if self.kind == "file" and not self.path:
            raise InitialDataError("file initial data needs a path")


@dataclass(frozen=True)
class SimConfig:
    d: int = 3
    s: float = 1.25
    epsilon: float = 0.0
    r_max: float = 60.0
    n: int = 512
    initial: InitialData = field(default_factory=InitialData)
    t_end: float = 1.0
    cfl: float = 0.4
    # None means "relative to the run": 1e-10 * first dt, and the smaller of
    # 1e3 * ||u0||_inf and half the density the grid can hold (mass / vol_0)
    dt_floor: float | None = None
    blowup_linf_threshold: float | None = None
    blowup_linf_factor: float = 1e3
    blowup_capacity_fraction: float = 0.5
    steady_residual_threshold: float = 1e-8
    steady_rate_threshold: float = 1e-8
    sample_dt: float = 0.01
    scheme: str = "muscl"
    snapshot_every: int = 0
    max_steps: int = 50_000_000

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not 0.0 < self.cfl < 1.0:
            raise ValueError(f"cfl must lie in (0, 1), got {self.cfl}")
        for name in ("t_end", "sample_dt", "steady_residual_threshold",
                     "steady_rate_threshold", "blowup_linf_factor",
                     "blowup_capacity_fraction"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("dt_floor", "blowup_linf_threshold"):
            v = getattr(self, name)
            if v is not None and not v > 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def params(self) -> ModelParams:
        return make_params(self.d, self.s, self.epsilon)

    def grid(self) -> RadialGrid:
        return make_grid(self.r_max, self.n, self.d)


@dataclass
class SimState:
    t: float
    u: Profile
    c: np.ndarray
    mu: np.ndarray
    dt_last: float = 0.0
    dt_stable: float = math.inf
    dissipation: float = 0.0


@dataclass
class Trajectory:
    config: SimConfig
    rows: list[DiagnosticRow]
    event: Event
    t_star: float | None
    final: SimState
    steps: int
    dt_floor: float
    linf_threshold: float
    snapshots: list[tuple[float, np.ndarray]] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def chemical_potential(u: Profile, K: KernelMatrix, params: ModelParams) -> np.ndarray:
    """``mu = m/(m-1) u^(m-1) - c`` with ``c`` the Riesz potential of ``u``.

    Returned as an array: unlike densities, ``mu`` takes both signs.
    """
    K.check_grid(u.grid)
    c = K.apply(u.values)
    return params.entropy_factor * u.values ** (params.m - 1.0) - c


def make_state(t: float, u: Profile, K: KernelMatrix, params: ModelParams) -> SimState:
    K.check_grid(u.grid)
    c = K.apply(u.values)
    mu = params.entropy_factor * u.values ** (params.m - 1.0) - c
    return SimState(float(t), u, c, mu)


def minmod(a, b):
    return np.where(a * b > 0.0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def face_values(u: np.ndarray):
    """Limited piecewise-linear reconstruction: (east, west) face values per cell.

    Mirror symmetry at r = 0 makes the first slope vanish, and the outer cell
    (no neighbour beyond the wall) stays first order.  Each face value lies
    between neighbouring cell values and is at most twice its own cell value,
    which the positivity bound in :func:`stable_dt` relies on.
    """
    du = np.diff(u)
    left = np.concatenate(([0.0], du))
    right = np.concatenate((du, [0.0]))
    half = 0.5 * minmod(left, right)
    return u + half, u - half


def _fluxes(state: SimState, params: ModelParams, scheme: str = "muscl"):
    """Edge velocities and upwinded edge densities on interior edges."""
    g = state.u.grid
    u = state.u.values
    r = g.centers
    v = -(state.mu[1:] - state.mu[:-1]) / (r[1:] - r[:-1])
    if scheme == "upwind":
        up = np.where(v > 0.0, u[:-1], u[1:])
    else:
        east, west = face_values(u)
        up = np.where(v > 0.0, east[:-1], west[1:])
    return v, up


def stable_dt(state: SimState, params: ModelParams, cfl: float, scheme: str = "muscl") -> float:
    """Largest explicit step allowed by the transport, diffusion and positivity limits."""
    g = state.u.grid
    u = state.u.values
    dr = g.dr
    v = -np.diff(state.mu) / np.diff(g.centers)
    limits = [math.inf]
    vmax = float(np.max(np.abs(v))) if v.size else 0.0
    if vmax > 0.0:
        limits.append(cfl * dr / vmax)
    dmax = float(np.max(params.m * u ** (params.m - 1.0)))
    if dmax > 0.0:
        limits.append(cfl * dr * dr / (2.0 * dmax))
    if params.epsilon > 0.0:
        limits.append(cfl * dr * dr / (2.0 * params.epsilon))
    # outflow through both faces of each cell must not exceed its content
    a = g.area[1:-1]
    eps_coef = params.epsilon / dr
    out = np.zeros(g.n)
    out[:-1] += a * (np.maximum(v, 0.0) + eps_coef)
    out[1:] += a * (np.maximum(-v, 0.0) + eps_coef)
    rate = float(np.max(out / g.vol))
    if scheme != "upwind":
        # a reconstructed face value can reach twice the cell average
        rate *= 2.0
    if rate > 0.0:
        limits.append(cfl / rate)
    return min(limits)


def step(state: SimState, K: KernelMatrix, params: ModelParams, cfl: float = 0.4,
         dt_max: float = math.inf, scheme: str = "muscl") -> SimState:
    """Advance by one forward-Euler step of size ``min(stable_dt, dt_max)``."""
    g = state.u.grid
    u = state.u.values
    v, up = _fluxes(state, params, scheme)
    dt_stable = stable_dt(state, params, cfl, scheme)
    dt = min(dt_stable, dt_max)
    if not math.isfinite(dt):
        raise ValueError("no finite step: state is at rest and dt_max is unbounded")
    if dt_stable == math.inf:
        # nothing moves
        return SimState(state.t + dt, state.u, state.c, state.mu, dt, dt_stable, 0.0)
    a = g.area[1:-1]
    flux = a * up * v
    if params.epsilon > 0.0:
        flux -= a * params.epsilon * (u[1:] - u[:-1]) / g.dr
    div = np.zeros(g.n)
    div[:-1] += flux
    div[1:] -= flux
    new = u - dt * div / g.vol
    if not np.all(np.isfinite(new)):
        raise SchemeIntegrityError(f"non-finite density at t={state.t + dt:.6g}")
    if np.any(new < 0.0):
        i = int(np.argmin(new))
        raise SchemeIntegrityError(
            f"negative density {new[i]:.3e} in cell {i} at t={state.t + dt:.6g}")
    # discrete dissipation sum_faces A u_up v^2 dr, i.e. int u |grad mu|^2
    diss = float(np.dot(a * up * v * v, g.centers[1:] - g.centers[:-1]))
    nxt = make_state(state.t + dt, Profile(g, new), K, params)
    nxt.dt_last = dt
    nxt.dt_stable = dt_stable
    nxt.dissipation = diss
    return nxt


def steady_residual(state: SimState) -> float:
    """u-weighted flatness of mu: ``max_i (u_i/max u) |mu_i - <mu>_u|``."""
    u = state.u.values
    umax = u.max()
    if umax <= 0.0:
        return 0.0
    w = u * state.u.grid.vol
    mean = float(np.dot(w, state.mu) / w.sum())
    return float(np.max(u / umax * np.abs(state.mu - mean)))


def initial_profile(cfg: SimConfig, grid: RadialGrid, K: KernelMatrix) -> Profile:
    init = cfg.initial
    params = cfg.params
    if init.kind == "steady":
        if init.kappa == 0.0:
            return Profile(grid, np.zeros(grid.n))
        base = K
        if params.epsilon != 0.0:
            base = cached_kernel(grid, make_params(params.d, params.s, 0.0))
        ss = calibrated_steady(init.lam, grid, base.params, base)
        return ss.profile.scaled(init.kappa)
    if init.kind == "gaussian":
        a, w = init.amplitude, init.width
        return Profile.from_function(grid, lambda r: a * np.exp(-(r / w) ** 2))
    data = np.genfromtxt(init.path, delimiter=",", names=True)
    try:
        r, u = np.asarray(data["r"], float), np.asarray(data["u"], float)
    except (ValueError, KeyError, IndexError) as exc:
        raise InitialDataError(f"{init.path}: need columns r,u") from exc
    if r.size < 2 or np.any(np.diff(r) <= 0) or np.any(u < 0) or not np.all(np.isfinite(u)):
        raise InitialDataError(f"{init.path}: r must increase and u be finite, nonnegative")
    return Profile(grid, np.interp(grid.centers, r, u, right=0.0))


def default_linf_threshold(u0: Profile, factor: float = 1e3, capacity_fraction: float = 0.5) -> float:
    """``min(factor * ||u0||_inf, capacity_fraction * mass / vol_0)``.

    A finite grid caps the density at ``mass / vol_0`` (everything in the
    innermost cell), so a purely relative threshold can be unreachable.
    Concentrating a fixed share of the mass into one cell is the grid-scale
    signature of collapse.
    """
    linf0 = float(u0.values.max())
    if linf0 <= 0.0:
        return math.inf
    cap = capacity_fraction * integrate(u0) / u0.grid.vol[0]
    return min(factor * linf0, cap)


def run(cfg: SimConfig, K: KernelMatrix | None = None, u0: Profile | None = None) -> Trajectory:
    """Integrate from the configured initial data until ``t_end`` or a terminal event.

    Blow-up is declared when ``||u||_inf`` exceeds the threshold or the step
    falls below ``dt_floor``; a steady state when mu is flat on the support
    (u-weighted) and ``||u||_m`` has stopped moving between samples.
    """
    params = cfg.params
    grid = cfg.grid() if K is None else K.grid
    if K is None:
        K = cached_kernel(grid, params)
    if u0 is None:
        u0 = initial_profile(cfg, grid, K)
    state = make_state(0.0, u0, K, params)
    linf0 = float(u0.values.max())
    threshold = cfg.blowup_linf_threshold
    if threshold is None:
        threshold = default_linf_threshold(u0, cfg.blowup_linf_factor,
                                           cfg.blowup_capacity_fraction)
    dt0 = stable_dt(state, params, cfg.cfl, cfg.scheme)
    dt_floor = cfg.dt_floor
    if dt_floor is None:
        dt_floor = 1e-10 * dt0 if math.isfinite(dt0) else 0.0

    rows = [diagnostic_row(0.0, state.u, K, params)]
    snaps = [(0.0, u0.values.copy())] if cfg.snapshot_every else []
    event, t_star = Event.REACHED_T_END, None
    steps = 0
    next_sample = cfg.sample_dt
    t_end = cfg.t_end
    while True:
        if state.t >= t_end * (1.0 - 1e-14):
            break
        target = min(next_sample, t_end)
        state = step(state, K, params, cfg.cfl, target - state.t, cfg.scheme)
        steps += 1
        if steps > cfg.max_steps:
            raise SchemeIntegrityError(f"exceeded {cfg.max_steps} steps at t={state.t}")
        if state.t >= target * (1.0 - 1e-14):
            state.t = target
            next_sample = target + cfg.sample_dt
            rows.append(diagnostic_row(state.t, state.u, K, params, state.dissipation))
            if cfg.snapshot_every and (len(rows) - 1) % cfg.snapshot_every == 0:
                snaps.append((state.t, state.u.values.copy()))
            prev = rows[-2]
            rate = abs(rows[-1].lm_norm - prev.lm_norm) / (
                max(prev.lm_norm, 1e-300) * (rows[-1].t - prev.t))
            if (linf0 > 0.0 and steady_residual(state) < cfg.steady_residual_threshold
                    and rate < cfg.steady_rate_threshold):
                event, t_star = Event.STEADY, state.t
                break
        linf = float(state.u.values.max())
        if linf > threshold or state.dt_stable < dt_floor:
            if rows[-1].t != state.t:
                rows.append(diagnostic_row(state.t, state.u, K, params, state.dissipation))
            event, t_star = Event.BLOWUP, state.t
            break
    if snaps and snaps[-1][0] != state.t:
        snaps.append((state.t, state.u.values.copy()))
    return Trajectory(cfg, rows, event, t_star, state, steps, dt_floor, threshold, snaps)


@dataclass(frozen=True)
class DissipationReport:
    max_jump: float
    slack: float
    passed: bool


def energy_dissipation_check(traj: Trajectory, slack: float | None = None) -> DissipationReport:
    """Largest increase of F between consecutive samples against ``slack``.

    The default slack is ``1e-6 * |F(u0)|``.
    """
    F = traj.column("free_energy")
    if F.size < 2:
        raise ValueError("need at least two samples")
    if slack is None:
        slack = 1e-6 * abs(F[0])
    jump = float(max(np.max(np.diff(F)), 0.0))
    return DissipationReport(jump, float(slack), jump <= slack)
