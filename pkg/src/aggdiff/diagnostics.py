"""Free energy, moments, the sharp HLS constant and dichotomy bookkeeping."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np
from scipy.special import gammaln

from .core import GridMismatchError, ModelParams, ParameterDomainError, Profile, integrate
from .riesz import KernelMatrix, interaction_energy


@dataclass(frozen=True)
class DiagnosticRow:
    t: float
    mass: float
    lm_norm: float
    linf: float
    free_energy: float
    second_moment: float
    moment_rhs: float
    dissipation: float = float("nan")

    def as_dict(self) -> dict:
        return asdict(self)


FIELDS = tuple(DiagnosticRow.__dataclass_fields__)


def entropy(u: Profile, params: ModelParams) -> float:
    """``int u^m dx``."""
    return integrate(u, lambda v: v**params.m)


def free_energy(u: Profile, K: KernelMatrix, params: ModelParams) -> float:
    """``F(u) = 1/(m-1) int u^m - W(u)``."""
    return entropy(u, params) / (params.m - 1.0) - interaction_energy(u, K)


def second_moment(u: Profile) -> float:
    return float(np.dot(u.grid.centers**2 * u.values, u.grid.vol))


def moment_rhs(u: Profile, K: KernelMatrix, params: ModelParams) -> float:
    """Right side of the virial law ``d/dt m2 = -4s int u^m + 2(d-2s) F(u)``."""
    return (-4.0 * params.s * entropy(u, params)
            + 2.0 * params.beta * free_energy(u, K, params))


def hls_constant(d: int, beta: float) -> float:
    """Sharp Hardy-Littlewood-Sobolev constant for ``q = q1 = 2d/(2d - beta)``.

    ``pi^(beta/2) Gamma(d/2 - beta/2) / Gamma(d - beta/2)
    * (Gamma(d/2)/Gamma(d))^(-1 + beta/d)``, evaluated in log space.
    """
    if not 0.0 < beta < d:
        raise ParameterDomainError(f"beta must lie in (0, d), got {beta}")
    log_c = (0.5 * beta * math.log(math.pi)
             + gammaln(0.5 * d - 0.5 * beta) - gammaln(d - 0.5 * beta)
             + (beta / d - 1.0) * (gammaln(0.5 * d) - gammaln(d)))
    return float(math.exp(log_c))


def hls_ratio(u: Profile, K: KernelMatrix, params: ModelParams) -> float:
    """``iint u u / |x-y|^(d-2s)`` divided by ``||u||_m^2``; at most the sharp constant."""
    norm = entropy(u, params) ** (1.0 / params.m)
    return 2.0 * params.beta * interaction_energy(u, K) / norm**2


def diagnostic_row(t: float, u: Profile, K: KernelMatrix, params: ModelParams,
                   dissipation: float = float("nan")) -> DiagnosticRow:
    Sm = entropy(u, params)
    W = interaction_energy(u, K)
    F = Sm / (params.m - 1.0) - W
    return DiagnosticRow(
        t=float(t),
        mass=integrate(u),
        lm_norm=Sm ** (1.0 / params.m),
        linf=float(u.values.max()),
        free_energy=F,
        second_moment=second_moment(u),
        moment_rhs=-4.0 * params.s * Sm + 2.0 * params.beta * F,
        dissipation=dissipation,
    )


class Prediction(str, Enum):
    GLOBAL = "Global"
    BLOWUP = "Blowup"
    CRITICAL = "CriticalUnclassified"


@dataclass(frozen=True)
class Margin:
    lm_ratio: float
    energy_ratio: float
    prediction: Prediction


def blowup_margin(u0: Profile, ss, K: KernelMatrix, rtol: float = 1e-9) -> Margin:
    """Place ``u0`` relative to the steady state ``ss`` and predict its fate.

    The dichotomy applies only below the steady energy; initial data with
    ``F(u0) >= F(U)`` or ``||u0||_m = ||U||_m`` (to within ``rtol``) are
    left unclassified.
    """
    if not u0.grid.same_as(ss.profile.grid):
        raise GridMismatchError("initial data and steady state live on different grids")
    p = ss.params
    lm0 = entropy(u0, p) ** (1.0 / p.m)
    lms = entropy(ss.profile, p) ** (1.0 / p.m)
    F0 = free_energy(u0, K, p)
    Fs = free_energy(ss.profile, K, p)
    ratio = lm0 / lms
    eratio = F0 / Fs
    if F0 >= Fs or abs(ratio - 1.0) <= rtol:
        pred = Prediction.CRITICAL
    elif ratio < 1.0:
        pred = Prediction.GLOBAL
    else:
        pred = Prediction.BLOWUP
    return Margin(ratio, eratio, pred)


def amplitude_energy(kappa, S: float, params: ModelParams):
    """Free energy of ``kappa U`` from the steady identities alone:
    ``kappa^m S/(m-1) - kappa^2 m S / (2(m-1))`` with ``S = int U^m``."""
    m = params.m
    kappa = np.asarray(kappa, dtype=float)
    return kappa**m * S / (m - 1.0) - kappa**2 * m * S / (2.0 * (m - 1.0))
