"""Warden-side analysis for a radiometer with log-uniform noise uncertainty.

Willie compares his average received power against a threshold ``zeta``.
Under silence he sees ``sigma_w^2``; under transmission he sees
``aleph + sigma_w^2`` where ``aleph`` is the leaked power.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import NoiseUncertainty, cascaded_channel, sample_willie_noise
from .errors import DomainError, InvalidArgument


@dataclass(frozen=True)
class CovertnessParams:
    rho: float
    sigma_w2_nominal: float
    varsigma: float = 0.1
    p_bs: float = 1.0

    def __post_init__(self):
        if self.rho < 1:
            raise InvalidArgument("rho must be >= 1")
        if self.sigma_w2_nominal <= 0:
            raise InvalidArgument("nominal noise power must be positive")
        if not 0 <= self.varsigma <= 1:
            raise InvalidArgument("varsigma must lie in [0, 1]")
        if self.p_bs < 0:
            raise InvalidArgument("p_bs must be non-negative")

    @property
    def lo(self) -> float:
        return self.sigma_w2_nominal / self.rho

    @property
    def hi(self) -> float:
        return self.rho * self.sigma_w2_nominal

    @property
    def log_span(self) -> float:
        """``ln(hi / lo)``, nominally ``2 ln(rho)``, taken from the stored endpoints
        so that a window covering the whole support has weight exactly one."""
        return math.log(self.hi) - math.log(self.lo)

    @property
    def aleph_critical(self) -> float:
        """Leakage beyond which Willie detects without error."""
        return self.sigma_w2_nominal * (self.rho - 1 / self.rho)

    @property
    def noise(self) -> NoiseUncertainty:
        return NoiseUncertainty(self.sigma_w2_nominal, self.rho)


@dataclass(frozen=True)
class CovertnessReport:
    aleph: float
    zeta_star: float
    p_dep_min: float
    p_leak: float
    feasible: bool

    @property
    def margin(self) -> float:
        return self.p_leak - self.aleph


def _need_uncertainty(params: CovertnessParams):
    if params.rho == 1:
        raise DomainError("rho = 1: the noise power is known and detection is deterministic")


def willie_leak_power(H_br, theta_vec, g_rw, p_bs: float) -> float:
    if p_bs < 0:
        raise InvalidArgument("p_bs must be non-negative")
    h = cascaded_channel(H_br, theta_vec, g_rw)
    return float(p_bs * np.real(np.vdot(h, h)))


def dep_closed_form(zeta, aleph: float, params: CovertnessParams):
    """Total detection error probability P_FA + P_MD at threshold ``zeta``.

    Vectorised over ``zeta``; returns a float for scalar input.
    """
    _need_uncertainty(params)
    if aleph < 0:
        raise InvalidArgument("aleph must be non-negative")
    z = np.asarray(zeta, dtype=float)
    if np.any(z <= 0):
        raise InvalidArgument("zeta must be positive")
    upper = np.minimum(z, params.hi)
    lower = np.maximum(z - aleph, params.lo)
    width = np.where(upper > lower,
                     (np.log(np.maximum(upper, 1e-300)) - np.log(lower)) / params.log_span,
                     0.0)
    p = np.clip(1.0 - width, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def false_alarm_probability(zeta, params: CovertnessParams):
    """Pr(sigma_w^2 > zeta) under the log-uniform noise model."""
    _need_uncertainty(params)
    z = np.asarray(zeta, dtype=float)
    cdf = (np.log(np.clip(z, params.lo, params.hi)) - math.log(params.lo)) / params.log_span
    p = np.clip(1.0 - cdf, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def missed_detection_probability(zeta, aleph: float, params: CovertnessParams):
    """Pr(aleph + sigma_w^2 < zeta)."""
    _need_uncertainty(params)
    z = np.asarray(zeta, dtype=float) - aleph
    cdf = np.where(z <= params.lo, 0.0,
                   (np.log(np.clip(z, params.lo, params.hi)) - math.log(params.lo))
                   / params.log_span)
    p = np.clip(cdf, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def optimal_threshold(aleph: float, params: CovertnessParams) -> float:
    _need_uncertainty(params)
    return min(params.lo + aleph, params.hi)


def min_dep(aleph: float, params: CovertnessParams) -> float:
    _need_uncertainty(params)
    if aleph >= params.aleph_critical:
        return 0.0
    value = 1.0 - math.log1p(params.rho * aleph / params.sigma_w2_nominal) / (2 * math.log(params.rho))
    return min(max(value, 0.0), 1.0)


def leakage_budget(params: CovertnessParams) -> float:
    """Largest leaked power that keeps Willie's minimum DEP above 1 - varsigma."""
    _need_uncertainty(params)
    if params.varsigma <= 0:
        warnings.warn("varsigma <= 0 leaves no leakage budget", stacklevel=2)
        return 0.0
    first = params.aleph_critical
    second = (params.rho ** (2 * params.varsigma) - 1) * params.sigma_w2_nominal / params.rho
    return min(first, second)


def covertness_satisfied(H_br, theta_vec, g_rw, params: CovertnessParams) -> tuple[bool, float]:
    aleph = willie_leak_power(H_br, theta_vec, g_rw, params.p_bs)
    budget = leakage_budget(params)
    return aleph < budget, budget - aleph


def covertness_report(aleph: float, params: CovertnessParams) -> CovertnessReport:
    budget = leakage_budget(params)
    return CovertnessReport(aleph=aleph, zeta_star=optimal_threshold(aleph, params),
                            p_dep_min=min_dep(aleph, params), p_leak=budget,
                            feasible=aleph < budget)


def dep_monte_carlo(zeta, aleph: float, params: CovertnessParams, rng: np.random.Generator,
                    n_trials: int = 100_000) -> tuple:
    """Empirical (P_FA, P_MD, P_DEP) from ``n_trials`` noise-power draws.

    A single batch of draws is shared by every threshold in ``zeta`` so the
    estimated curves are monotone in ``zeta`` by construction.
    """
    if n_trials < 10_000:
        raise InvalidArgument("n_trials must be >= 1e4")
    z = np.atleast_1d(np.asarray(zeta, dtype=float))
    draws = np.sort(sample_willie_noise(params.noise, rng, size=n_trials))
    # Pr(sigma^2 > z) and Pr(sigma^2 < z - aleph) through the sorted sample
    p_fa = 1.0 - np.searchsorted(draws, z, side="right") / n_trials
    p_md = np.searchsorted(draws, z - aleph, side="left") / n_trials
    p_dep = p_fa + p_md
    if np.ndim(zeta) == 0:
        return float(p_fa[0]), float(p_md[0]), float(p_dep[0])
    return p_fa, p_md, p_dep
