"""Rate-splitting signal model: SINRs, rates and common-rate bookkeeping."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .channel import complex_to_pairs, pairs_to_complex
from .errors import InvalidArgument

_GUARD = 1e-30


@dataclass(frozen=True)
class BeamformingState:
    """BS precoders, RIS phases and the per-user common-rate shares."""

    w_c: np.ndarray
    w: np.ndarray          # (K, M_BS), row k is the private precoder of user k
    theta: np.ndarray      # (N,) phases in [0, 2 pi)
    p_c: np.ndarray        # (K,) common-rate shares, bit/s/Hz

    def __post_init__(self):
        w_c = np.asarray(self.w_c, dtype=complex).ravel()
        w = np.atleast_2d(np.asarray(self.w, dtype=complex))
        if w.shape[1] != w_c.size:
            raise InvalidArgument("private and common precoders differ in length")
        theta = np.mod(np.asarray(self.theta, dtype=float).ravel(), 2 * np.pi)
        p_c = np.asarray(self.p_c, dtype=float).ravel()
        if p_c.size != w.shape[0]:
            raise InvalidArgument("one common-rate share per user is required")
        if np.any(p_c < 0):
            raise InvalidArgument("common-rate shares must be non-negative")
        for name, value in (("w_c", w_c), ("w", w), ("theta", theta), ("p_c", p_c)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def k(self) -> int:
        return self.w.shape[0]

    @property
    def power(self) -> float:
        """Tr(W^H W)."""
        return float(np.sum(np.abs(self.w_c) ** 2) + np.sum(np.abs(self.w) ** 2))

    @property
    def W(self) -> np.ndarray:
        """Stacked matrix ``[w_c, w_1, ..., w_K]`` of shape ``(M_BS, K + 1)``."""
        return np.column_stack([self.w_c, self.w.T])

    def replace(self, **kw) -> "BeamformingState":
        d = dict(w_c=self.w_c, w=self.w, theta=self.theta, p_c=self.p_c)
        d.update(kw)
        return BeamformingState(**d)

    def to_dict(self) -> dict:
        return {
            "schema": "nfcovert.state/1",
            "w_c": complex_to_pairs(self.w_c),
            "w": complex_to_pairs(self.w),
            "theta": self.theta.tolist(),
            "p_c": self.p_c.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BeamformingState":
        doc = json.loads(text)
        return cls(pairs_to_complex(doc["w_c"]), pairs_to_complex(doc["w"]),
                   np.asarray(doc["theta"]), np.asarray(doc["p_c"]))


@dataclass(frozen=True)
class RateReport:
    gamma_c: np.ndarray
    gamma_p: np.ndarray
    R_c: np.ndarray
    R_p: np.ndarray
    p_c: np.ndarray
    R_total: float
    common_violation: bool

    def rows(self) -> list[dict]:
        """One record per user (the experiment CSV layout)."""
        return [
            {"user": k, "gamma_c": float(self.gamma_c[k]), "gamma_p": float(self.gamma_p[k]),
             "R_c": float(self.R_c[k]), "R_p": float(self.R_p[k]), "p_c": float(self.p_c[k])}
            for k in range(self.R_c.size)
        ]


def _check_noise(sigma_k2):
    if np.any(np.asarray(sigma_k2) <= 0):
        raise InvalidArgument("noise power must be positive")


def sinr_matrix(h: np.ndarray, w_c: np.ndarray, w: np.ndarray, noise) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised common/private SINRs for all users.

    ``h`` is ``(K, M)`` (rows are cascaded channels), ``w`` is ``(K, M)``.
    """
    _check_noise(noise)
    h = np.atleast_2d(h)
    noise = np.broadcast_to(np.asarray(noise, dtype=float), (h.shape[0],))
    common = np.abs(h.conj() @ w_c) ** 2
    priv = np.abs(h.conj() @ w.T) ** 2          # [k, i] = |h_k^H w_i|^2
    total = priv.sum(axis=1)
    own = np.diag(priv)
    gamma_c = common / (total + noise)
    gamma_p = own / (total - own + noise)
    return gamma_c, gamma_p


def sinr_common(h_k: np.ndarray, state: BeamformingState, sigma_k2: float) -> float:
    _check_noise(sigma_k2)
    h_k = np.asarray(h_k).ravel()
    if h_k.size != state.w_c.size:
        raise InvalidArgument("channel and precoder dimensions differ")
    sig = abs(np.vdot(h_k, state.w_c)) ** 2
    interference = sum(abs(np.vdot(h_k, wi)) ** 2 for wi in state.w)
    return float(sig / (interference + sigma_k2))


def sinr_private(h_k: np.ndarray, state: BeamformingState, k: int, sigma_k2: float) -> float:
    _check_noise(sigma_k2)
    h_k = np.asarray(h_k).ravel()
    if h_k.size != state.w_c.size:
        raise InvalidArgument("channel and precoder dimensions differ")
    if not 0 <= k < state.k:
        raise InvalidArgument("user index out of range")
    sig = abs(np.vdot(h_k, state.w[k])) ** 2
    interference = sum(abs(np.vdot(h_k, state.w[i])) ** 2 for i in range(state.k) if i != k)
    return float(sig / (interference + sigma_k2))


def rates(state: BeamformingState, channels: np.ndarray, noise) -> RateReport:
    """Rates of every user from its cascaded channel (rows of ``channels``)."""
    channels = np.atleast_2d(channels)
    if channels.shape != state.w.shape:
        raise InvalidArgument("need one cascaded channel per user")
    gamma_c, gamma_p = sinr_matrix(channels, state.w_c, state.w, noise)
    R_c = np.log2(1 + gamma_c)
    R_p = np.log2(1 + gamma_p)
    total = float(np.sum(state.p_c) + np.sum(R_p))
    violation = bool(np.sum(state.p_c) > R_c.min() + 1e-9)
    return RateReport(gamma_c, gamma_p, R_c, R_p, state.p_c.copy(), total, violation)


def allocate_common_rate(R_c: np.ndarray, R_p: np.ndarray, r_min: np.ndarray,
                         tol: float = 1e-9) -> tuple[np.ndarray, bool]:
    """Split the decodable common rate ``min_k R_c,k`` among users.

    Each user first receives what it needs to reach ``r_min``; any surplus
    goes to user 0 (the covert user).  Returns ``(shares, qos_feasible)``.
    When the common rate cannot cover every deficit the shares are scaled
    down proportionally and the flag is False.
    """
    budget = float(np.min(R_c))
    deficit = np.maximum(np.asarray(r_min, dtype=float) - np.asarray(R_p, dtype=float), 0.0)
    need = deficit.sum()
    if need > budget + tol:
        share = deficit * (budget / need) if need > 0 else deficit
        return share, False
    share = deficit.copy()
    share[0] += max(budget - need, 0.0)
    return share, True


def qos_deficit(R_c: np.ndarray, R_p: np.ndarray, r_min: np.ndarray) -> float:
    """Amount by which the common rate falls short of covering every QoS gap."""
    deficit = np.maximum(np.asarray(r_min) - np.asarray(R_p), 0.0).sum()
    return float(max(deficit - np.min(R_c), 0.0))


def received_signal_mc(state: BeamformingState, channels: np.ndarray, noise,
                       rng: np.random.Generator, n_samples: int = 10_000) -> dict:
    """Simulate y_k = h_k^H (w_c s_c + sum_i w_i s_i) + n_k with Gaussian symbols.

    Returns per-user empirical SINRs of both streams, their standard errors
    (delta method on the ratio of sample means) and the implied rates.
    """
    if n_samples < 1000:
        raise InvalidArgument("n_samples must be >= 1000")
    channels = np.atleast_2d(channels)
    k_users = channels.shape[0]
    noise = np.broadcast_to(np.asarray(noise, dtype=float), (k_users,))

    def cn(size):
        return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2)

    s_c = cn(n_samples)
    s = cn((state.k, n_samples))
    out = {"gamma_c": [], "gamma_p": [], "se_c": [], "se_p": [], "common_power": []}
    for k in range(k_users):
        hk = channels[k]
        comp_c = np.vdot(hk, state.w_c) * s_c
        comp = (hk.conj() @ state.w.T)[:, None] * s
        n_k = np.sqrt(noise[k]) * cn(n_samples)
        y = comp_c + comp.sum(axis=0) + n_k
        # common stream: everything else is interference
        g_c, se_c = _ratio(np.abs(comp_c) ** 2, np.abs(y - comp_c) ** 2)
        # private stream after perfect SIC of s_c
        after = y - comp_c
        g_p, se_p = _ratio(np.abs(comp[k]) ** 2, np.abs(after - comp[k]) ** 2)
        out["gamma_c"].append(g_c)
        out["gamma_p"].append(g_p)
        out["se_c"].append(se_c)
        out["se_p"].append(se_p)
        out["common_power"].append(float(np.mean(np.abs(comp_c) ** 2)))
    result = {key: np.asarray(val) for key, val in out.items()}
    result["R_c"] = np.log2(1 + result["gamma_c"])
    result["R_p"] = np.log2(1 + result["gamma_p"])
    return result


def _ratio(num: np.ndarray, den: np.ndarray) -> tuple[float, float]:
    n = num.size
    mu_n, mu_d = num.mean(), den.mean()
    if mu_d <= _GUARD:
        return float(mu_n / _GUARD), 0.0
    r = mu_n / mu_d
    cov = np.cov(np.vstack([num, den]))
    var = (cov[0, 0] - 2 * r * cov[0, 1] + r * r * cov[1, 1]) / (mu_d ** 2 * n)
    return float(r), float(np.sqrt(max(var, 0.0)))
