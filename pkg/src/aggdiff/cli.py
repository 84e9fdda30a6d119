"""Command-line front end: ``aggdiff {steady,simulate,dichotomy,verify}``.

Settings come from flags, then an optional ``--config`` file of
``key = value`` lines, then built-in defaults.  Every command writes CSV
tables plus a JSON manifest into ``--out``.  Exit status: 0 success,
1 failed check or scheme failure, 2 bad flags or parameters.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .acceptance import SuiteConfig, classify_runs, run_many, run_suite
from .core import ParameterDomainError, make_grid, make_params
from .diagnostics import FIELDS, Prediction, entropy, free_energy, hls_constant, hls_ratio
from .io import write_csv
from .riesz import cache_path, cached_kernel, quadrature_order
from .solver import (
    Event, InitialData, InitialDataError, SchemeIntegrityError, SimConfig, chemical_potential, run,
)
from .steady import (
    CalibrationError, calibrated_steady, pohozaev_residual, stationarity_residual, steady_profile,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULTS = {
    "lambda": 1.0, "rmax": 60.0, "n": 512, "epsilon": 0.0, "cfl": 0.4,
    "kappa": 0.8, "tend": 10.0, "sample_dt": 0.05, "dtfloor": None, "linfmax": None,
    "scheme": "muscl", "snapshot_every": 0, "init": "steady", "amplitude": 1.0,
    "width": 1.0, "init_file": None, "kappas": "0.6,0.8,0.9,1.1,1.2,1.5",
    "margin": 0.05, "workers": None, "out": "aggdiff-out",
}
REQUIRED = ("d", "s")

# identity tolerances for ``steady``
STEADY_TOLERANCES = {
    "pohozaev": 1e-3, "energy_ratio": 1e-2, "hls_ratio": 1e-2,
    "lambda_invariance": 1e-3, "stationarity": 1e-2,
}


class UsageError(Exception):
    pass


def _pos_float(text):
    v = float(text)
    if not v > 0.0:
        raise ValueError(f"expected a positive number, got {text}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise ValueError(f"expected a nonnegative integer, got {text}")
    return v


CONVERTERS = {
    "d": int, "s": float, "lambda": _pos_float, "rmax": _pos_float, "n": int,
    "epsilon": float, "cfl": float, "kappa": float, "tend": _pos_float,
    "sample_dt": _pos_float, "dtfloor": _pos_float, "linfmax": _pos_float, "scheme": str,
    "snapshot_every": _nonneg_int, "init": str, "amplitude": float, "width": _pos_float,
    "init_file": str, "kappas": str, "margin": float, "workers": int, "out": str,
}

GRID_KEYS = ("d", "s", "lambda", "rmax", "n", "out")
COMMAND_KEYS = {
    "steady": GRID_KEYS + ("epsilon",),
    "simulate": GRID_KEYS + ("epsilon", "cfl", "kappa", "tend", "sample_dt", "dtfloor",
                             "linfmax", "scheme", "snapshot_every", "init", "amplitude",
                             "width", "init_file"),
    "dichotomy": GRID_KEYS + ("cfl", "tend", "sample_dt", "dtfloor", "linfmax", "scheme",
                              "kappas", "margin", "workers"),
    "verify": GRID_KEYS + ("cfl", "workers"),
}


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if not key or not value:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        out[key] = value
    return out


def resolve(command: str, flags: dict) -> dict:
    """Merge flags over config file over defaults, converting and checking keys."""
    allowed = COMMAND_KEYS[command]
    merged = {k: DEFAULTS[k] for k in allowed if k in DEFAULTS}
    cfg_path = flags.pop("config", None)
    if cfg_path:
        for key, value in read_config(cfg_path).items():
            if key not in allowed:
                raise UsageError(f"unknown key {key!r} in {cfg_path} for '{command}'")
            try:
                merged[key] = CONVERTERS[key](value)
            except ValueError as exc:
                raise UsageError(f"bad value for {key!r} in {cfg_path}: {exc}") from exc
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    missing = [k for k in REQUIRED if merged.get(k) is None]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join("--" + k for k in missing))
    return merged


def _add_common(p: argparse.ArgumentParser, keys) -> None:
    p.add_argument("--config", help="key = value settings file (flags take precedence)")
    for key in keys:
        flag = "--" + key.replace("_", "-")
        dest = key
        help_ = f"default {DEFAULTS[key]}" if key in DEFAULTS else "required"
        p.add_argument(flag, dest=dest, type=CONVERTERS[key], default=None, help=help_)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aggdiff",
        description="Radial aggregation-diffusion at the energy-critical exponent.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "steady": "calibrate the steady profile and check its identities",
        "simulate": "integrate one trajectory",
        "dichotomy": "scan initial amplitudes against the global/blow-up dichotomy",
        "verify": "run the full acceptance suite",
    }
    parser.commands = {}
    for name, keys in COMMAND_KEYS.items():
        p = sub.add_parser(name, help=helps[name], description=helps[name])
        _add_common(p, keys)
        parser.commands[name] = p
    return parser


# manifest --------------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    config: dict
    version: str = __version__
    cache_key: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    status: str = "running"
    exit_code: int | None = None
    wall_clock_s: float | None = None
    path: Path | None = None
    _start: float = field(default_factory=time.perf_counter)

    def write(self) -> None:
        data = {k: v for k, v in asdict(self).items() if k not in ("path", "_start")}
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_name(self.path.name + ".tmp")
        tmp.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        os.replace(tmp, self.path)

    def add(self, path: Path) -> None:
        self.outputs.append(path.name)

    def finish(self, code: int) -> int:
        self.exit_code = code
        self.status = "complete" if code == EXIT_OK else "failed"
        self.wall_clock_s = time.perf_counter() - self._start
        self.write()
        return code


def _kernel_key(grid, params) -> dict:
    order = quadrature_order(params)
    return {"d": params.d, "s": params.s, "epsilon": params.epsilon, "r_max": grid.r_max,
            "n": grid.n, "order": order, "file": cache_path(grid, params, order).name}


def _start(command: str, cfg: dict) -> RunManifest:
    out = Path(cfg["out"])
    man = RunManifest(command, dict(cfg), path=out / f"manifest-{command}.json")
    man.write()
    return man


# commands --------------------------------------------------------------------

def _setup(cfg: dict, epsilon: float = 0.0):
    params = make_params(cfg["d"], cfg["s"], epsilon)
    grid = make_grid(cfg["rmax"], cfg["n"], cfg["d"])
    return params, grid


def lambda_invariance(lam: float, grid, params) -> float:
    """Spread of ``||U(B=1)||_m^m`` over ``lam/2``, ``lam`` and ``2 lam``, relative."""
    vals = [entropy(steady_profile(x, 1.0, grid, params).profile, params)
            for x in (lam, 0.5 * lam, 2.0 * lam)]
    return (max(vals) - min(vals)) / vals[0]


def cmd_steady(cfg: dict) -> int:
    params0, grid = _setup(cfg)
    params = make_params(cfg["d"], cfg["s"], cfg.get("epsilon", 0.0))
    man = _start("steady", cfg)
    K0 = cached_kernel(grid, params0)
    man.cache_key = _kernel_key(grid, params0)
    ss = calibrated_steady(cfg["lambda"], grid, params0, K0)
    # with epsilon > 0 the potential and mu are reported for the regularized kernel
    K = K0 if params.epsilon == 0.0 else cached_kernel(grid, params)
    c = K.apply(ss.profile.values)
    mu = chemical_potential(ss.profile, K, params)
    out = Path(cfg["out"])
    man.add(write_csv(out / "steady_profile.csv", ("r", "u", "c", "mu"),
                      zip(grid.centers.tolist(), ss.profile.values.tolist(), c.tolist(), mu.tolist())))

    S = entropy(ss.profile, params0)
    checks = [
        ("pohozaev", abs(pohozaev_residual(ss, K0)) / S, 0.0),
        ("energy_ratio", free_energy(ss.profile, K0, params0) / S, 2.0 * params0.s / params0.beta),
        ("hls_ratio", hls_ratio(ss.profile, K0, params0), hls_constant(params0.d, params0.beta)),
        ("lambda_invariance", lambda_invariance(cfg["lambda"], grid, params0), 0.0),
        ("stationarity", stationarity_residual(ss, K0), 0.0),
    ]
    rows, ok = [], True
    for name, value, target in checks:
        tol = STEADY_TOLERANCES[name]
        err = abs(value - target) / abs(target) if target else abs(value)
        passed = err <= tol
        ok &= passed
        rows.append((name, value, target, err, tol, passed))
        print(f"{name:>18}: {value:.8g} (target {target:.8g}, error {err:.2e}, tol {tol:.0e})"
              f" {'ok' if passed else 'FAILED'}")
    rows.append(("amplitude_B", ss.B, math.nan, math.nan, math.nan, True))
    rows.append(("tail_mass_fraction", ss.tail_mass_fraction, math.nan, math.nan, math.nan, True))
    rows.append(("tail_lm_fraction", ss.tail_lm_fraction, math.nan, math.nan, math.nan, True))
    man.add(write_csv(out / "identity_report.csv",
                      ("check", "value", "target", "error", "tolerance", "passed"), rows))
    return man.finish(EXIT_OK if ok else EXIT_FAIL)


def _sim_config(cfg: dict, kappa: float) -> SimConfig:
    init = InitialData(cfg.get("init", "steady"), kappa=kappa, lam=cfg["lambda"],
                       amplitude=cfg.get("amplitude", 1.0), width=cfg.get("width", 1.0),
                       path=cfg.get("init_file"))
    return SimConfig(d=cfg["d"], s=cfg["s"], epsilon=cfg.get("epsilon", 0.0), r_max=cfg["rmax"],
                     n=cfg["n"], initial=init, t_end=cfg["tend"], cfl=cfg["cfl"],
                     dt_floor=cfg.get("dtfloor"), blowup_linf_threshold=cfg.get("linfmax"),
                     sample_dt=cfg["sample_dt"], scheme=cfg["scheme"],
                     snapshot_every=cfg.get("snapshot_every", 0))


def cmd_simulate(cfg: dict) -> int:
    sim = _sim_config(cfg, cfg["kappa"])
    params0, grid = _setup(cfg)
    man = _start("simulate", cfg)
    K = cached_kernel(grid, sim.params)
    man.cache_key = _kernel_key(grid, sim.params)
    try:
        tr = run(sim, K)
    except SchemeIntegrityError as exc:
        print(f"scheme integrity failure: {exc}", file=sys.stderr)
        return man.finish(EXIT_FAIL)
    K0 = K if sim.params.epsilon == 0.0 else cached_kernel(grid, params0)
    ss = calibrated_steady(cfg["lambda"], grid, params0, K0)
    lms = entropy(ss.profile, params0) ** (1.0 / params0.m)
    out = Path(cfg["out"])
    man.add(write_csv(out / "trajectory.csv", FIELDS, (tuple(r.as_dict().values()) for r in tr.rows)))
    sup = float(tr.column("lm_norm").max())
    man.add(write_csv(
        out / "events.csv",
        ("event", "t_star", "t_final", "steps", "sup_lm_ratio", "linf_threshold", "dt_floor"),
        [(tr.event, tr.t_star, tr.final.t, tr.steps, sup / lms, tr.linf_threshold, tr.dt_floor)]))
    if tr.snapshots:
        man.add(write_csv(out / "snapshots.csv", ("t", "r", "u"),
                          ((t, r, v) for t, u in tr.snapshots
                           for r, v in zip(grid.centers.tolist(), u.tolist()))))
    print(f"{tr.event.value} at t={tr.final.t:.6g} after {tr.steps} steps; "
          f"sup ||u||_m / ||U||_m = {sup / lms:.6f}")
    return man.finish(EXIT_OK)


def parse_kappas(text: str) -> list[float]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise UsageError("empty kappa list")
    try:
        kappas = [float(t) for t in items]
    except ValueError as exc:
        raise UsageError(f"bad kappa list {text!r}") from exc
    if any(not (k >= 0.0 and math.isfinite(k)) for k in kappas):
        raise UsageError("kappas must be nonnegative")
    return kappas


def _matches(pred: Prediction, event: Event) -> bool:
    if pred is Prediction.GLOBAL:
        return event in (Event.REACHED_T_END, Event.STEADY)
    if pred is Prediction.BLOWUP:
        return event is Event.BLOWUP
    return True


def cmd_dichotomy(cfg: dict) -> int:
    kappas = parse_kappas(cfg["kappas"])
    if cfg["margin"] < 0:
        raise UsageError("margin must be nonnegative")
    params, grid = _setup(cfg)
    man = _start("dichotomy", cfg)
    K = cached_kernel(grid, params)
    man.cache_key = _kernel_key(grid, params)
    ss = calibrated_steady(cfg["lambda"], grid, params, K)
    workers = cfg.get("workers") or os.cpu_count() or 1
    sims = [_sim_config(dict(cfg, init="steady"), k) for k in kappas]
    try:
        results = run_many(sims, K, workers)
    except SchemeIntegrityError:
        # rerun one at a time to name the failing amplitude
        for k, sim in zip(kappas, sims):
            try:
                run(sim, K)
            except SchemeIntegrityError as exc:
                print(f"kappa={k:g}: scheme integrity failure: {exc}", file=sys.stderr)
                return man.finish(EXIT_FAIL)
        raise
    runs = dict(zip(kappas, results))
    rows, ok = [], True
    for row in classify_runs(ss, K, runs):
        k = row["kappa"]
        scored = abs(k - 1.0) >= cfg["margin"] and row["predicted"] is not Prediction.CRITICAL
        pred = row["predicted"] if scored else Prediction.CRITICAL
        match = _matches(pred, row["observed"])
        ok &= match or not scored
        rows.append((k, row["lm_ratio"], row["energy_ratio"], pred, row["observed"],
                     row["t_star"], row["sup_lm_ratio"], row["m2_decreasing"], scored, match))
        print(f"kappa={k:<6g} ratio={row['lm_ratio']:.4f} F0/Fs={row['energy_ratio']:.4f} "
              f"predicted={pred.value:<20} observed={row['observed'].value:<14} "
              f"t*={'-' if row['t_star'] is None else format(row['t_star'], '.4g')}")
    man.add(write_csv(Path(cfg["out"]) / "dichotomy.csv",
                      ("kappa", "lm_ratio", "energy_ratio", "predicted", "observed", "t_star",
                       "sup_lm_ratio", "m2_decreasing", "scored", "match"), rows))
    return man.finish(EXIT_OK if ok else EXIT_FAIL)


def cmd_verify(cfg: dict) -> int:
    make_params(cfg["d"], cfg["s"])
    make_grid(cfg["rmax"], cfg["n"], cfg["d"])
    suite_cfg = SuiteConfig(d=cfg["d"], s=cfg["s"], lam=cfg["lambda"], r_max=cfg["rmax"],
                            n=cfg["n"], cfl=cfg["cfl"], workers=cfg.get("workers") or 1)
    man = _start("verify", cfg)
    man.cache_key = _kernel_key(make_grid(cfg["rmax"], cfg["n"], cfg["d"]),
                                make_params(cfg["d"], cfg["s"]))
    results = run_suite(suite_cfg, lambda c: print(c.line(), flush=True))
    man.add(write_csv(Path(cfg["out"]) / "acceptance.csv",
                      ("criterion", "name", "passed", "value", "tolerance", "detail"),
                      [(c.number, c.name, c.passed, c.value, c.tolerance, c.detail) for c in results]))
    failed = [c for c in results if not c.passed]
    if failed:
        print("failed: " + ", ".join(f"{c.number} ({c.name})" for c in failed))
        return man.finish(EXIT_FAIL)
    print("all criteria passed")
    return man.finish(EXIT_OK)


COMMANDS = {"steady": cmd_steady, "simulate": cmd_simulate,
            "dichotomy": cmd_dichotomy, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    try:
        cfg = resolve(command, args)
        return COMMANDS[command](cfg)
    except CalibrationError as exc:
        print(f"aggdiff {command}: calibration failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (UsageError, ParameterDomainError, InitialDataError) as exc:
        print(parser.commands[command].format_usage(), end="", file=sys.stderr)
        print(f"aggdiff {command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"aggdiff {command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
