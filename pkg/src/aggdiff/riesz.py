"""Radial Riesz potential operator.

For a radial density ``u`` the potential

    c(x) = 1/(d-2s) * int u(y) / (|x-y|^2 + eps^2)^((d-2s)/2) dy

reduces, after integrating over spheres, to a one-dimensional sum
``c_i = sum_j K_ij u_j vol_j``.  ``K_ij`` is the angular weight of
:func:`angular_weight` averaged over the source and target shells (a
piecewise-constant Galerkin discretization): the matrix is symmetric, and
for piecewise-constant densities ``c_i`` is the exact shell average of the
potential and ``W(u)`` the exact interaction energy.  The matrix is dense: assembly costs
O(n^2 * order) kernel evaluations, storage is O(n^2) and every application
is an O(n^2) matrix-vector product.  At n of a few thousand this is cheaper
and far easier to verify than any fast transform.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import GridMismatchError, ModelParams, Profile, RadialGrid, cell_quadrature, sphere_area

DEFAULT_ORDER = 64
CELL_NODES = 3
CACHE_FORMAT = 1.0
_ROW_CHUNK = 8


def quadrature_order(params: ModelParams) -> int:
    # the diagonal integrand behaves like theta^(2s-2); refine near s = 1
    return 2 * DEFAULT_ORDER if params.s < 1.1 else DEFAULT_ORDER


def _theta_rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    theta = 0.5 * np.pi * (x + 1.0)
    return theta, 0.5 * np.pi * w


def angular_weight(r, rho, params: ModelParams, order: int | None = None):
    """Angular part of the radial Riesz kernel.

    Returns the sphere average ``omega_{d-1}/(omega_d (d-2s)) * int_0^pi
    (r^2 + rho^2 - 2 r rho cos(theta) + eps^2)^(-(d-2s)/2) sin(theta)^(d-2)
    dtheta`` by Gauss-Legendre quadrature in theta, so that the potential is
    ``c(r) = int K(r, rho) u(rho) dV(rho)`` with the d-dimensional volume
    element.  At the origin this is ``(rho^2 + eps^2)^(-(d-2s)/2) / (d-2s)``.
    ``r`` and ``rho`` broadcast against each other.  For s > 1 the integrand stays integrable (like theta^(2s-2)) on the
    diagonal r = rho, so no singular correction is applied.
    """
    order = quadrature_order(params) if order is None else int(order)
    theta, w = _theta_rule(order)
    d, beta, eps2 = params.d, params.beta, params.epsilon**2
    wts = w * np.sin(theta) ** (d - 2)
    cos = np.cos(theta)
    r = np.asarray(r, dtype=float)[..., None]
    rho = np.asarray(rho, dtype=float)[..., None]
    dist2 = r * r + rho * rho - 2.0 * r * rho * cos + eps2
    # round-off can push (r - rho)^2 slightly negative at theta -> 0
    dist2 = np.maximum(dist2, 0.0)
    with np.errstate(divide="ignore"):
        vals = dist2 ** (-0.5 * beta)
    out = vals @ wts
    return sphere_area(d - 1) / (sphere_area(d) * beta) * out


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Dense radial Riesz operator on one grid.

    ``entries[i, j]`` is the angular weight averaged over shells i and j;
    ``origin_row[j]`` is the weight between ``r = 0`` and shell j, used to
    read off the potential at the centre of symmetry.
    """

    grid: RadialGrid
    params: ModelParams
    entries: np.ndarray = field(repr=False)
    origin_row: np.ndarray = field(repr=False)
    order: int = DEFAULT_ORDER

    @property
    def cache_key(self) -> tuple:
        p, g = self.params, self.grid
        return (p.d, p.s, p.epsilon, g.r_max, g.n)

    def check_grid(self, grid: RadialGrid) -> None:
        if not self.grid.same_as(grid):
            raise GridMismatchError(
                f"kernel built on grid {self.grid.key}, profile lives on {grid.key}")

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.entries @ (values * self.grid.vol)

    def zeroed(self) -> "KernelMatrix":
        """Same grid and parameters with no interaction (pure porous-medium flow)."""
        return KernelMatrix(self.grid, self.params, np.zeros_like(self.entries),
                            np.zeros_like(self.origin_row), self.order)


def assemble_kernel(grid: RadialGrid, params: ModelParams, order: int | None = None,
                    workers: int = 1, cell_nodes: int = CELL_NODES) -> KernelMatrix:
    """Dense shell-averaged Riesz matrix; rows are independent of each other."""
    if grid.d != params.d:
        raise GridMismatchError(f"grid dimension {grid.d} != model dimension {params.d}")
    order = quadrature_order(params) if order is None else int(order)
    n = grid.n
    rq, wq = cell_quadrature(grid, cell_nodes)
    r_flat = rq.ravel()
    w_flat = wq.ravel()
    try:
        K = np.empty((n, n))
    except MemoryError as exc:
        raise MemoryError(f"cannot allocate a dense {n}x{n} kernel") from exc

    def fill(start):
        stop = min(start + _ROW_CHUNK, n)
        # (rows, q, n*q) point weights between target and source nodes
        A = angular_weight(rq[start:stop, :, None], r_flat[None, None, :], params, order)
        A = np.einsum("iq,iqp->ip", wq[start:stop], A) * w_flat
        K[start:stop] = A.reshape(stop - start, n, cell_nodes).sum(axis=2)

    starts = range(0, n, _ROW_CHUNK)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(fill, starts))
    else:
        for st in starts:
            fill(st)
    # exact symmetry; the two triangles differ only by summation order
    K = 0.5 * (K + K.T)
    origin = (angular_weight(0.0, r_flat, params, order) * w_flat).reshape(n, cell_nodes).sum(axis=1)
    K.setflags(write=False)
    origin.setflags(write=False)
    return KernelMatrix(grid, params, K, origin, order)


def potential(u: Profile, K: KernelMatrix) -> Profile:
    """Chemoattractant concentration ``c`` generated by ``u``."""
    K.check_grid(u.grid)
    return Profile(u.grid, np.maximum(K.apply(u.values), 0.0))


def potential_at_origin(u: Profile, K: KernelMatrix) -> float:
    K.check_grid(u.grid)
    return float(K.origin_row @ (u.values * u.grid.vol))


def interaction_energy(u: Profile, K: KernelMatrix) -> float:
    """``W(u) = 1/(2(d-2s)) * iint u(x) u(y) / |x-y|^(d-2s) dx dy``."""
    K.check_grid(u.grid)
    c = K.apply(u.values)
    return 0.5 * float(np.dot(u.values * u.grid.vol, c))


# --- on-disk cache -----------------------------------------------------------
#
# File layout: six little-endian float64 header fields
#   (format, d, s, epsilon, r_max, n)
# followed by the n*n entries in row-major order and the n origin weights.

def cache_dir() -> Path:
    env = os.environ.get("AGGDIFF_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "aggdiff"


def cache_path(grid: RadialGrid, params: ModelParams, order: int, directory=None) -> Path:
    key = f"{params.d}|{params.s!r}|{params.epsilon!r}|{grid.r_max!r}|{grid.n}|{order}"
    digest = hashlib.sha1(key.encode()).hexdigest()[:16]
    return Path(directory or cache_dir()) / f"kernel-{digest}.bin"


def save_kernel(K: KernelMatrix, path) -> None:
    p, g = K.params, K.grid
    header = np.array([CACHE_FORMAT, p.d, p.s, p.epsilon, g.r_max, g.n], dtype="<f8")
    body = np.concatenate([K.entries.ravel(), K.origin_row]).astype("<f8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(f".tmp{os.getpid()}")
    with open(tmp, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(body.tobytes())
    os.replace(tmp, path)


def load_kernel(path, grid: RadialGrid, params: ModelParams, order: int) -> KernelMatrix | None:
    """Return the cached kernel, or ``None`` if the file is absent or stale."""
    try:
        raw = np.fromfile(path, dtype="<f8")
    except (FileNotFoundError, OSError):
        return None
    n = grid.n
    if raw.size != 6 + n * n + n:
        return None
    expected = np.array([CACHE_FORMAT, params.d, params.s, params.epsilon, grid.r_max, n])
    if not np.array_equal(raw[:6], expected):
        return None
    entries = raw[6:6 + n * n].reshape(n, n).astype(float)
    origin = raw[6 + n * n:].astype(float)
    entries.setflags(write=False)
    origin.setflags(write=False)
    return KernelMatrix(grid, params, entries, origin, order)


def cached_kernel(grid: RadialGrid, params: ModelParams, use_cache: bool = True,
                  directory=None, workers: int = 1) -> KernelMatrix:
    """Assemble the kernel, going through the disk cache when allowed."""
    order = quadrature_order(params)
    if not use_cache:
        return assemble_kernel(grid, params, order, workers)
    path = cache_path(grid, params, order, directory)
    K = load_kernel(path, grid, params, order)
    if K is None:
        K = assemble_kernel(grid, params, order, workers)
        try:
            save_kernel(K, path)
        except OSError:
            pass
    return K
