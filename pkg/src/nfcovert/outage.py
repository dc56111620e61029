"""Outage analysis under the Gaussian BS-RIS / deterministic RIS-user model.

The cascaded channel of user ``k`` is CN(0, sigma_bru_k^2 I); with matched
precoders the received stream powers become independent Exp(1) variates
scaled by the power fractions.  All CDFs below are exact for that model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class PowerSplit:
    alpha_c: float
    alpha: tuple
    p_bs: float

    def __post_init__(self):
        alpha = tuple(float(a) for a in np.atleast_1d(self.alpha))
        object.__setattr__(self, "alpha", alpha)
        if self.alpha_c < 0 or any(a < 0 for a in alpha):
            raise InvalidArgument("power fractions must be non-negative")
        if abs(self.alpha_c + sum(alpha) - 1.0) > 1e-9:
            raise InvalidArgument("power fractions must sum to one")
        if self.p_bs <= 0:
            raise InvalidArgument("p_bs must be positive")

    @property
    def k(self) -> int:
        return len(self.alpha)

    @classmethod
    def equal_private(cls, alpha_c: float, k: int, p_bs: float) -> "PowerSplit":
        return cls(alpha_c, (1 - alpha_c) / k * np.ones(k), p_bs)


def effective_variance(r_kn: Sequence[float], wavelength: float, sigma_br2: float,
                       beta: float = 1.0) -> float:
    """Per-entry variance of the cascaded channel for one user.

    ``r_kn`` holds the distances from every RIS element to the user.
    """
    r_kn = np.asarray(r_kn, dtype=float)
    if r_kn.size == 0:
        raise InvalidArgument("need at least one RIS element")
    if np.any(r_kn <= 0) or wavelength <= 0:
        raise InvalidArgument("distances and wavelength must be positive")
    lam_k = np.sum(1.0 / (4 * np.pi * r_kn / wavelength) ** 2)
    return float(sigma_br2 * beta ** 2 * lam_k / r_kn.size)


@dataclass(frozen=True)
class OutageModel:
    """Statistical description of each user's cascaded channel.

    ``sigma_bru2[k]`` is the effective variance, ``sigma_k2`` the receiver
    noise and the thresholds are linear SINRs.
    """

    sigma_bru2: tuple
    sigma_k2: float
    gamma_th_c: float
    gamma_th_p: float

    def __post_init__(self):
        var = tuple(float(v) for v in np.atleast_1d(self.sigma_bru2))
        object.__setattr__(self, "sigma_bru2", var)
        if any(v < 0 for v in var):
            raise InvalidArgument("variances must be non-negative")
        if self.sigma_k2 <= 0:
            raise InvalidArgument("noise power must be positive")
        if self.gamma_th_c < 0 or self.gamma_th_p < 0:
            raise InvalidArgument("thresholds must be non-negative")

    @classmethod
    def from_geometry(cls, r_kn: np.ndarray, wavelength: float, sigma_br2: float,
                      sigma_k2: float, gamma_th_c: float, gamma_th_p: float,
                      beta: float = 1.0) -> "OutageModel":
        r_kn = np.atleast_2d(r_kn)
        var = tuple(effective_variance(row, wavelength, sigma_br2, beta) for row in r_kn)
        return cls(var, sigma_k2, gamma_th_c, gamma_th_p)

    def snr_scale(self, k: int, p_bs: float) -> float:
        """Noise-to-signal ratio ``sigma_k^2 / (P_bs sigma_bru,k^2)``."""
        var = self.sigma_bru2[k]
        return math.inf if var == 0 else self.sigma_k2 / (p_bs * var)


def _ratio_cdf(gamma, own: float, others: np.ndarray, s: float):
    """Pr(own X_0 / (sum_i others_i X_i + s) <= gamma), X ~ Exp(1) i.i.d."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise InvalidArgument("gamma must be non-negative")
    if own == 0:
        return np.where(g > 0, 1.0, 0.0)
    t = g / own
    with np.errstate(over="ignore", invalid="ignore"):
        survival = np.exp(-t * s) if math.isfinite(s) else np.where(t > 0, 0.0, 1.0)
        for a in others:
            survival = survival / (1 + t * a)
    return np.clip(1.0 - survival, 0.0, 1.0)


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def cdf_common(gamma, split: PowerSplit, model: OutageModel, k: int = 0):
    s = model.snr_scale(k, split.p_bs)
    return _out(_ratio_cdf(gamma, split.alpha_c, np.asarray(split.alpha), s))


def cdf_private(gamma, split: PowerSplit, model: OutageModel, k: int = 0):
    others = np.asarray([a for i, a in enumerate(split.alpha) if i != k])
    s = model.snr_scale(k, split.p_bs)
    return _out(_ratio_cdf(gamma, split.alpha[k], others, s))


def outage_probability(split: PowerSplit, model: OutageModel, k: int = 0) -> float:
    """Correlation-heuristic outage: F_c + F_p - min(F_c, F_p)."""
    f_c = cdf_common(model.gamma_th_c, split, model, k)
    f_p = cdf_private(model.gamma_th_p, split, model, k)
    return float(np.clip(f_c + f_p - min(f_c, f_p), 0.0, 1.0))


def outage_union_exact(split: PowerSplit, model: OutageModel, k: int = 0) -> float:
    """Exact Pr(gamma_c < th_c or gamma_p < th_p) for the same model.

    Both SINRs share the private variate X_k; integrating it out gives
    1 - exp(-u s) / (1 + c a_k) * prod_{i != k} 1 / (1 + u a_i) with
    c = th_c / a_c, p = th_p / a_k and u = c + p (1 + c a_k).
    """
    t_c, t_p = model.gamma_th_c, model.gamma_th_p
    a_k = split.alpha[k]
    if (t_c > 0 and split.alpha_c == 0) or (t_p > 0 and a_k == 0):
        return 1.0
    s = model.snr_scale(k, split.p_bs)
    c = t_c / split.alpha_c if t_c > 0 else 0.0
    p = t_p / a_k if t_p > 0 else 0.0
    u = c + p * (1 + c * a_k)
    if u == 0:
        return 0.0
    if not math.isfinite(s):
        return 1.0
    joint = math.exp(-u * s) / (1 + c * a_k)
    for i, a in enumerate(split.alpha):
        if i != k:
            joint /= 1 + u * a
    return float(min(max(1.0 - joint, 0.0), 1.0))


@dataclass(frozen=True)
class OutageEstimate:
    p_out: float
    f_c: float
    f_p: float
    n_trials: int
    union_exact: float
    approx: float

    @property
    def stderr(self) -> float:
        p = self.union_exact
        return math.sqrt(max(p * (1 - p), 1e-300) / self.n_trials)

    @property
    def approx_gap(self) -> float:
        """How much the max-heuristic underestimates the exact union."""
        return self.union_exact - self.approx


def simulate_sinrs(split: PowerSplit, model: OutageModel, rng: np.random.Generator,
                   n_trials: int, k: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Draw (gamma_c, gamma_p) pairs for user ``k`` from Exp(1) stream powers."""
    K = split.k
    x_c = rng.exponential(size=n_trials)
    x = rng.exponential(size=(K, n_trials))
    s = model.snr_scale(k, split.p_bs)
    alpha = np.asarray(split.alpha)[:, None]
    interf = (alpha * x).sum(axis=0)
    own = alpha[k, 0] * x[k]
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma_c = split.alpha_c * x_c / (interf + s)
        gamma_p = own / (interf - own + s)
    return gamma_c, gamma_p


def outage_monte_carlo(split: PowerSplit, model: OutageModel, rng: np.random.Generator,
                       n_trials: int = 100_000, k: int = 0) -> OutageEstimate:
    if n_trials < 10_000:
        raise InvalidArgument("n_trials must be >= 1e4")
    gamma_c, gamma_p = simulate_sinrs(split, model, rng, n_trials, k)
    ev_c = gamma_c < model.gamma_th_c
    ev_p = gamma_p < model.gamma_th_p
    f_c, f_p = ev_c.mean(), ev_p.mean()
    union = (ev_c | ev_p).mean()
    if not max(f_c, f_p) <= union <= f_c + f_p:
        raise AssertionError("union bounds violated by the Monte-Carlo batch")
    return OutageEstimate(p_out=float(union), f_c=float(f_c), f_p=float(f_p), n_trials=n_trials,
                          union_exact=outage_union_exact(split, model, k),
                          approx=outage_probability(split, model, k))


def mgf_interference(t: float, alphas: Sequence[float], p_bs: float, s_ratio: float) -> float:
    """Closed-form E[exp(-t Y)] with Y = sum_i alpha_i P_bs X_i + s_ratio."""
    out = math.exp(-t * s_ratio)
    for a in alphas:
        out /= 1 + t * a * p_bs
    return out
