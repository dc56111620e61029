"""Inner SCA loops for the precoder and reflection subproblems.

Everything here runs in normalised units: each user's channel is divided by
its noise standard deviation and precoders by ``sqrt(p_ref)``.  Returned
precoders are in watts-amplitude again.

Both loops are guarded by the true merit ``R_sum - mu * s*``, where ``s*``
is the smallest QoS slack that a common-rate split can achieve at the
current point.  A surrogate step that lowers the merit by more than the
solver tolerance is rejected, so the inner traces are monotone by
construction even when the conic solver returns an inaccurate point.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..config import AOConfig, SystemConfig
from ..covertness import CovertnessParams, leakage_budget
from ..errors import InfeasibleError, InvalidArgument
from ..rsma import allocate_common_rate
from .subproblems import (SubproblemBS, SubproblemRIS, build_bs_subproblem,
                          build_ris_subproblem)

MODULUS_FLOOR = 1e-12


@dataclass
class Instance:
    """One realization together with the scalars the loops need."""

    H: np.ndarray            # (N, M)
    G: np.ndarray            # (K, N)
    g_w: np.ndarray          # (N,)
    noise: np.ndarray        # (K,)
    p_max: float
    p_leak: float
    r_min: np.ndarray
    ao: AOConfig = field(default_factory=AOConfig)

    @classmethod
    def build(cls, realization, cfg: SystemConfig, ao: Optional[AOConfig] = None) -> "Instance":
        params = CovertnessParams(cfg.rho, cfg.willie_noise, cfg.varsigma)
        k = realization.k
        r_min = cfg.r_min
        if r_min.size != k:
            raise InvalidArgument("n_users does not match the realization")
        return cls(np.asarray(realization.H_br), np.asarray(realization.g_users),
                   np.asarray(realization.g_rw), np.full(k, cfg.noise), cfg.p_max,
                   leakage_budget(params), r_min, ao or AOConfig())

    @property
    def k(self) -> int:
        return self.G.shape[0]

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def m(self) -> int:
        return self.H.shape[1]

    @property
    def p_ref(self) -> float:
        return self.p_max if self.p_max > 0 else 1.0

    @property
    def leak_cap(self) -> float:
        return self.p_leak * (1 - self.ao.leak_margin)

    def cascaded(self, psi: np.ndarray) -> np.ndarray:
        """Rows ``h_k = H^H diag(psi) g_k`` for any (possibly relaxed) ``psi``."""
        return (self.G * psi[None, :]) @ self.H.conj()

    def willie_gain(self, psi: np.ndarray) -> float:
        h = self.H.conj().T @ (psi * self.g_w)
        return float(np.real(np.vdot(h, h)))


def qos_slack(R_c: np.ndarray, R_p: np.ndarray, r_min: np.ndarray) -> float:
    """Smallest ``s >= 0`` for which the common rate covers ``r_min - s``."""
    budget = float(np.min(R_c))
    gap = np.asarray(r_min, dtype=float) - np.asarray(R_p, dtype=float)

    def need(s):
        return np.maximum(gap - s, 0.0).sum()

    if need(0.0) <= budget:
        return 0.0
    lo, hi = 0.0, float(gap.max())
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if need(mid) <= budget:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class Metrics:
    gamma_c: np.ndarray
    gamma_p: np.ndarray
    R_c: np.ndarray
    R_p: np.ndarray
    r_sum: float
    slack: float
    merit: float
    power: float
    aleph: float


def evaluate(inst: Instance, W: np.ndarray, psi: np.ndarray) -> Metrics:
    """True rates and residual measures of ``(W, psi)``; ``W`` is ``(M, K+1)``."""
    h = inst.cascaded(psi)
    amp = np.abs(h.conj() @ W) ** 2                   # [k, j]
    K = inst.k
    own = amp[np.arange(K), 1 + np.arange(K)]
    interf = amp[:, 1:].sum(axis=1) + inst.noise
    gamma_c = amp[:, 0] / interf
    gamma_p = own / (interf - own)
    R_c, R_p = np.log2(1 + gamma_c), np.log2(1 + gamma_p)
    slack = qos_slack(R_c, R_p, inst.r_min)
    r_sum = float(R_c.min() + R_p.sum())
    power = float(np.sum(np.abs(W) ** 2))
    return Metrics(gamma_c, gamma_p, R_c, R_p, r_sum, slack,
                   r_sum - inst.ao.qos_penalty * slack, power, power * inst.willie_gain(psi))


def max_residual(inst: Instance, m: Metrics, psi: np.ndarray) -> float:
    """Largest constraint violation (power, leakage, QoS, modulus)."""
    return float(max(m.power - inst.p_max, m.aleph - inst.p_leak, m.slack,
                     np.max(np.abs(np.abs(psi) - 1)) if psi.size else 0.0, 0.0))


@dataclass
class TraceRecord:
    outer_iter: int
    inner_iter: int
    stage: str
    r_sum: float
    merit: float
    max_residual: float
    aleph_watts: float
    ms_elapsed: float


def _check_anchor(sub, z0: np.ndarray, aux: dict, tol: float = 1e-8):
    """The linearised SINR bounds must be tight at their own anchor."""
    x0 = np.concatenate([z0.real, z0.imag])
    nu = sub.L_c.value @ x0 - sub.b_c.value * aux["kappa"]
    beth = sub.L_p.value @ x0 - sub.b_p.value * aux["eta"]
    scale = 1 + np.abs(aux["nu"]).max() + np.abs(aux["beth"]).max()
    if (np.abs(nu - aux["nu"]).max() > tol * scale
            or np.abs(beth - aux["beth"]).max() > tol * scale):
        raise AssertionError("SCA bound is not tight at the anchor")


def power_limit(inst: Instance, psi: np.ndarray) -> float:
    """Largest total power allowed by ``P_max`` and the leakage budget at ``psi``."""
    gain = inst.willie_gain(psi)
    return min(inst.p_max, inst.leak_cap / gain) if gain > 0 else inst.p_max


def fill_power(inst: Instance, W: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Rescale ``W`` to the largest feasible power.

    Every SINR ``a P / (b P + sigma^2)`` is nondecreasing in a common power
    scale, so this never lowers a rate; it also removes solver-tolerance
    overshoot of either cap.
    """
    power = np.sum(np.abs(W) ** 2)
    if power <= 0:
        return W
    return W * np.sqrt(power_limit(inst, psi) / power)


def _normalised_channels(inst: Instance, psi: np.ndarray) -> np.ndarray:
    return inst.cascaded(psi) * np.sqrt(inst.p_ref / inst.noise)[:, None]


def bs_loop(inst: Instance, psi: np.ndarray, W0: np.ndarray, outer: int = 0,
            sub: Optional[SubproblemBS] = None, clock: Optional[float] = None):
    """Precoder SCA iterations for fixed reflection ``psi``.

    Returns ``(W, p_c, metrics, records, sub)``.
    """
    ao = inst.ao
    clock = time.perf_counter() if clock is None else clock
    h_norm = _normalised_channels(inst, psi)
    cap = inst.p_max / inst.p_ref
    lw = inst.p_ref * inst.willie_gain(psi) / inst.leak_cap
    W = np.asarray(W0, dtype=complex)
    cur = evaluate(inst, W, psi)
    records = []
    for j in range(1, ao.j_max + 1):
        z0 = W.ravel(order="F") / np.sqrt(inst.p_ref)
        if j == 1 and sub is None:
            sub = build_bs_subproblem(h_norm, z0, cap, lw, inst.r_min, ao.qos_penalty)
        else:
            sub = build_bs_subproblem(h_norm, z0, cap, lw, inst.r_min, ao.qos_penalty, reuse=sub)
        _check_anchor(sub, z0, sub.set_anchor(z0))
        try:
            sol = sub.solve(ao.solver, ao.tol_feas, ao.tol_opt)
        except InfeasibleError:
            if j == 1 and cur.power == 0 and inst.p_max > 0:
                raise InfeasibleError("precoder subproblem infeasible at the initial point",
                                      family="initialization")
            break
        W_new = fill_power(inst, sol.z.reshape(inst.m, inst.k + 1, order="F")
                           * np.sqrt(inst.p_ref), psi)
        new = evaluate(inst, W_new, psi)
        accepted = new.merit >= cur.merit - 10 * ao.tol_opt
        if accepted:
            gain, W, cur = new.merit - cur.merit, W_new, new
        records.append(TraceRecord(outer, j, "bs", cur.r_sum, cur.merit,
                                   max_residual(inst, cur, psi), cur.aleph,
                                   1e3 * (time.perf_counter() - clock)))
        if not accepted or abs(gain) <= ao.eps:
            break
    p_c, _ = allocate_common_rate(cur.R_c, cur.R_p, inst.r_min)
    return W, p_c, cur, records, sub


def ris_loop(inst: Instance, W: np.ndarray, psi0: np.ndarray, outer: int = 0,
             sub: Optional[SubproblemRIS] = None, clock: Optional[float] = None):
    """SCA iterations on the relaxed reflection vector for fixed precoder directions.

    Returns ``(psi, W, metrics, records, sub)``; ``psi`` satisfies
    ``|psi_n| <= 1`` and ``W`` is the input rescaled by the power factor the
    step chose.
    """
    ao = inst.ao
    clock = time.perf_counter() if clock is None else clock
    psi = np.asarray(psi0, dtype=complex)
    W = np.asarray(W, dtype=complex)
    cur = evaluate(inst, W, psi)
    records = []
    for q in range(1, ao.q_max + 1):
        if cur.power <= 0:
            break
        # work at full power: z = sqrt(P / P_max) psi, tau in [0, 1]
        scale = np.sqrt(inst.p_max / cur.power)
        W_full = W * scale
        z0 = psi / scale
        sub = build_ris_subproblem(inst.H, inst.G, inst.g_w, W_full, inst.noise,
                                   inst.p_max / inst.leak_cap, z0, inst.r_min, ao.qos_penalty,
                                   tau_max=1.0, reuse=sub)
        _check_anchor(sub, z0, sub.set_anchor(z0))
        try:
            sol = sub.solve(ao.solver, ao.tol_feas, ao.tol_opt)
        except InfeasibleError:
            break
        cand, tau = sub.split(sol)
        W_cand = W_full * np.sqrt(tau)
        mag = np.abs(cand)
        cand = np.where(mag > 1, cand / np.maximum(mag, 1e-300), cand)
        if tau > 0:
            W_cand = fill_power(inst, W_cand, cand)
        new = evaluate(inst, W_cand, cand)
        accepted = (new.merit >= cur.merit - 10 * ao.tol_opt
                    and new.aleph <= inst.leak_cap * (1 + 1e-9))
        if accepted:
            gain, psi, W, cur = new.merit - cur.merit, cand, W_cand, new
        records.append(TraceRecord(outer, q, "ris-relaxed", cur.r_sum, cur.merit,
                                   max_residual(inst, cur, np.exp(1j * np.angle(psi))), cur.aleph,
                                   1e3 * (time.perf_counter() - clock)))
        if not accepted or abs(gain) <= ao.eps:
            break
    return psi, W, cur, records, sub


def project_unit_modulus(psi) -> tuple[np.ndarray, np.ndarray]:
    """Phases of ``psi``; entries below 1e-12 in magnitude get phase 0 and a flag."""
    psi = np.atleast_1d(np.asarray(psi, dtype=complex))
    flagged = np.abs(psi) < MODULUS_FLOOR
    theta = np.where(flagged, 0.0, np.mod(np.angle(psi), 2 * np.pi))
    return theta, flagged


def restore_unit_modulus(inst: Instance, W: np.ndarray, theta_prev: np.ndarray,
                         psi_relaxed: np.ndarray, W_prev: Optional[np.ndarray] = None):
    """Project the relaxed reflection vector, backtracking toward ``theta_prev``.

    Blends ``(1 - t) e^{j theta_prev} + t psi`` for ``t = 1, 1/2, ...``,
    refills the power for each projected candidate and keeps the first one
    that stays within the leakage budget without lowering the merit of the
    previous unit-modulus point ``(W_prev, theta_prev)``.  Falls back to
    that point.  Returns ``(theta, W, metrics, t)`` with ``t = 0`` on
    fallback.
    """
    W_prev = W if W_prev is None else W_prev
    prev = np.exp(1j * theta_prev)
    base = evaluate(inst, W_prev, prev)
    t = 1.0
    for _ in range(inst.ao.backtrack_steps + 1):
        theta, _ = project_unit_modulus((1 - t) * prev + t * psi_relaxed)
        psi = np.exp(1j * theta)
        W_t = fill_power(inst, W, psi)
        m = evaluate(inst, W_t, psi)
        if m.aleph < inst.p_leak and m.merit >= base.merit - 10 * inst.ao.tol_opt:
            return theta, W_t, m, t
        t *= 0.5
    return np.mod(theta_prev, 2 * np.pi), W_prev, base, 0.0


def mrt_precoders(h: np.ndarray, power: float, common_fraction: float) -> np.ndarray:
    """``[w_c, w_1, ..., w_K]`` matched to Bob (common) and each user (private)."""
    K, M = h.shape

    def unit(v):
        nrm = np.linalg.norm(v)
        return v / nrm if nrm > 0 else np.full(M, 1 / np.sqrt(M), dtype=complex)

    W = np.empty((M, K + 1), dtype=complex)
    W[:, 0] = np.sqrt(common_fraction * power) * unit(h[0])
    for k in range(K):
        W[:, 1 + k] = np.sqrt((1 - common_fraction) * power / K) * unit(h[k])
    return W


def sca_bs_loop(realization, theta_fixed, w0, cfg: SystemConfig,
                ao: Optional[AOConfig] = None):
    """Precoder SCA loop on a realization; returns ``(W, p_c, R_sum, records)``."""
    inst = Instance.build(realization, cfg, ao)
    W0 = np.asarray(w0, dtype=complex)
    if np.sum(np.abs(W0) ** 2) > inst.p_max * (1 + 1e-9) + 1e-15:
        raise InfeasibleError("initial precoder exceeds P_max; re-initialise W", family="power")
    W, p_c, m, records, _ = bs_loop(inst, np.exp(1j * np.asarray(theta_fixed, dtype=float)), W0)
    return W, p_c, m.r_sum, records
