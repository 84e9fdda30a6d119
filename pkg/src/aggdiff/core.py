"""Model parameters, radial grids and radial integration.

Every integral over R^d of a radial function is reduced to a cell sum
``sum_i f(u_i) * vol_i`` on a cell-centred radial mesh, where ``vol_i`` is
the exact d-dimensional volume of the spherical shell occupied by cell i.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln


class ParameterDomainError(ValueError):
    """A model or grid parameter lies outside its admissible range."""


class DimensionError(ParameterDomainError):
    pass


class InteractionOrderError(ParameterDomainError):
    pass


class RegularizationError(ParameterDomainError):
    pass


class GridError(ParameterDomainError):
    pass


class GridMismatchError(ValueError):
    """Two objects that must share a grid do not."""


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d, 2 pi^(d/2) / Gamma(d/2)."""
    return float(2.0 * np.exp(0.5 * d * np.log(np.pi) - gammaln(0.5 * d)))


@dataclass(frozen=True)
class ModelParams:
    """Dimension ``d``, interaction order ``s`` and regularization ``epsilon``.

    The diffusion exponent ``m = 2d/(d+2s)`` is derived, never passed in.
    """

    d: int
    s: float
    epsilon: float = 0.0
    m: float = field(init=False)

    def __post_init__(self):
        m = 2.0 * self.d / (self.d + 2.0 * self.s)
        object.__setattr__(self, "m", m)

    @property
    def beta(self) -> float:
        """Riesz kernel power ``d - 2s``."""
        return self.d - 2.0 * self.s

    @property
    def entropy_factor(self) -> float:
        """``m/(m-1)``, which equals ``2d/(d-2s)`` at the critical exponent."""
        return self.m / (self.m - 1.0)


def make_params(d: int, s: float, epsilon: float = 0.0) -> ModelParams:
    if isinstance(d, bool) or int(d) != d:
        raise DimensionError(f"dimension must be an integer, got {d!r}")
    d = int(d)
    if d < 3:
        raise DimensionError(f"dimension must satisfy d >= 3, got d={d}")
    s = float(s)
    if not (1.0 < s < 0.5 * d):
        raise InteractionOrderError(
            f"interaction order must satisfy 1 < s < d/2 = {0.5 * d}, got s={s}")
    epsilon = float(epsilon)
    if not epsilon >= 0.0:
        raise RegularizationError(f"epsilon must be >= 0, got {epsilon}")
    p = ModelParams(d, s, epsilon)
    if not (1.0 < p.m < 2.0 - 2.0 * s / d):
        raise ParameterDomainError(
            f"m={p.m} is not in the aggregation-dominated range (1, 2 - 2s/d)")
    return p


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform cell-centred mesh on [0, r_max] carrying d-dimensional volumes."""

    r_max: float
    n: int
    d: int
    edges: np.ndarray = field(repr=False)
    centers: np.ndarray = field(repr=False)
    vol: np.ndarray = field(repr=False)
    area: np.ndarray = field(repr=False)

    @property
    def dr(self) -> float:
        return self.r_max / self.n

    @property
    def key(self) -> tuple:
        return (self.d, float(self.r_max), int(self.n))

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or self.key == other.key


def make_grid(r_max: float, n: int, d: int) -> RadialGrid:
    """Uniform radial grid with ``n`` cells on ``[0, r_max]`` in dimension ``d``.

    ``area[k]`` is the surface area of the sphere through edge ``k`` and
    ``vol[i] = omega_d (r_{i+1/2}^d - r_{i-1/2}^d) / d``.
    """
    r_max = float(r_max)
    if not (r_max > 0.0 and np.isfinite(r_max)):
        raise GridError(f"r_max must be positive and finite, got {r_max}")
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise GridError(f"cell count must be a positive integer, got {n!r}")
    n = int(n)
    d = int(d)
    if d < 1:
        raise DimensionError(f"dimension must be positive, got {d}")
    omega = sphere_area(d)
    edges = np.linspace(0.0, r_max, n + 1)
    edges[-1] = r_max
    centers = 0.5 * (edges[:-1] + edges[1:])
    vol = omega * np.diff(edges**d) / d
    area = omega * edges ** (d - 1)
    for a in (edges, centers, vol, area):
        a.setflags(write=False)
    return RadialGrid(r_max, n, d, edges, centers, vol, area)


def cell_quadrature(grid: RadialGrid, k: int = 4):
    """Gauss-Legendre nodes inside each cell with volume-fraction weights.

    Returns ``(r, w)`` of shape ``(n, k)``; ``sum(f(r) * w, axis=1)`` is the
    average of ``f`` over each spherical shell (rows of ``w`` sum to one).
    """
    x, wx = np.polynomial.legendre.leggauss(k)
    a = grid.edges[:-1, None]
    b = grid.edges[1:, None]
    r = 0.5 * (a + b) + 0.5 * (b - a) * x
    w = 0.5 * (b - a) * wx * r ** (grid.d - 1) * sphere_area(grid.d) / grid.vol[:, None]
    return r, w


@dataclass(eq=False)
class Profile:
    """Nonnegative radial density sampled at the cell centres of ``grid``."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise GridMismatchError(
                f"profile has shape {v.shape}, grid has {self.grid.n} cells")
        if np.any(np.isnan(v)) or np.any(v < 0.0):
            raise ValueError("profile values must be nonnegative numbers")
        self.values = v

    @classmethod
    def from_function(cls, grid: RadialGrid, fn: Callable[[np.ndarray], np.ndarray],
                      average: bool = True) -> "Profile":
        """Render a radial function on ``grid``.

        By default each value is the cell average of ``fn`` (a finite-volume
        representation, exact in mass up to the cell quadrature); with
        ``average=False`` the function is sampled at the cell centres.
        """
        if not average:
            return cls(grid, fn(grid.centers))
        r, w = cell_quadrature(grid)
        return cls(grid, (fn(r) * w).sum(axis=1))

    def scaled(self, k: float) -> "Profile":
        return Profile(self.grid, k * self.values)


def integrate(p: Profile, f: Callable[[np.ndarray], np.ndarray] | None = None) -> float:
    """Midpoint cell sum of ``f(u)`` over R^d; ``f`` defaults to the identity."""
    vals = p.values if f is None else np.asarray(f(p.values), dtype=float)
    return float(np.dot(vals, p.grid.vol))


def lp_norm(p: Profile, q: float) -> float:
    if q == np.inf:
        return float(p.values.max()) if p.values.size else 0.0
    if not q >= 1.0:
        raise ParameterDomainError(f"norm exponent must be >= 1, got {q}")
    return integrate(p, lambda u: u**q) ** (1.0 / q)
