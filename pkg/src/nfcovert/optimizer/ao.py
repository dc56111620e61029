"""Alternating optimisation driver and terminal constraint audit."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..config import AOConfig, SystemConfig
from ..errors import InfeasibleError
from ..rsma import BeamformingState, rates
from .sca import (Instance, TraceRecord, bs_loop, evaluate, mrt_precoders, restore_unit_modulus,
                  ris_loop)

# |exp(j theta)| is 1 up to rounding of cos/sin; a few ulps is "exact"
MODULUS_ULP = 4 * np.finfo(float).eps

TRACE_COLUMNS = ("outer_iter", "inner_iter", "r_sum", "max_residual", "aleph_watts", "ms_elapsed")


@dataclass
class OptimizerTrace:
    eps: float
    j_max: int
    q_max: int
    s_max: int
    records: list = field(default_factory=list)
    outer_r_sum: list = field(default_factory=list)
    outer_merit: list = field(default_factory=list)
    inner_counts: list = field(default_factory=list)     # (J, Q) per outer iteration

    @property
    def n_outer(self) -> int:
        return len(self.outer_r_sum) - 1

    def nondecreasing(self, tol: float = 1e-5) -> bool:
        r = np.asarray(self.outer_r_sum)
        return bool(np.all(np.diff(r) >= -tol))

    def to_csv(self, with_time: bool = True) -> str:
        buf = io.StringIO()
        cols = TRACE_COLUMNS if with_time else TRACE_COLUMNS[:-1]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for rec in self.records:
            writer.writerow([repr(getattr(rec, c)) if isinstance(getattr(rec, c), float)
                             else getattr(rec, c) for c in cols])
        return buf.getvalue()


@dataclass(frozen=True)
class Audit:
    power: float
    p_max: float
    common_sum: float
    common_cap: float
    qos_gap: float
    aleph: float
    p_leak: float
    modulus_error: float
    tol: float = 1e-6

    @property
    def violations(self) -> list[str]:
        out = []
        if self.power > self.p_max + self.tol:
            out.append("power")
        if self.common_sum > self.common_cap + self.tol:
            out.append("common-rate")
        if self.qos_gap > self.tol:
            out.append("qos")
        if not self.aleph < self.p_leak:
            out.append("covertness")
        if self.modulus_error > MODULUS_ULP:
            out.append("unit-modulus")
        return out

    @property
    def ok(self) -> bool:
        return not self.violations


def audit_state(state: BeamformingState, realization, cfg: SystemConfig,
                tol: float = 1e-6) -> Audit:
    """Recompute every terminal constraint from scratch."""
    inst = Instance.build(realization, cfg)
    psi = np.exp(1j * state.theta)
    rep = rates(state, realization.user_channels(state.theta), cfg.noise)
    qos_gap = float(np.max(inst.r_min - state.p_c - rep.R_p))
    return Audit(power=state.power, p_max=cfg.p_max, common_sum=float(np.sum(state.p_c)),
                 common_cap=float(rep.R_c.min()), qos_gap=max(qos_gap, 0.0),
                 aleph=state.power * inst.willie_gain(psi), p_leak=inst.p_leak,
                 modulus_error=float(np.max(np.abs(np.abs(psi) - 1.0))), tol=tol)


@dataclass
class AOResult:
    state: BeamformingState
    r_sum: float
    trace: OptimizerTrace
    audit: Audit

    def __iter__(self):
        return iter((self.state, self.r_sum, self.trace))

    @property
    def feasible(self) -> bool:
        return self.audit.ok

    @property
    def violations(self) -> list[str]:
        return self.audit.violations


def initial_point(inst: Instance, rng: np.random.Generator):
    """Random phases and MRT precoders at ``init_power_fraction`` of the budget."""
    theta = rng.uniform(0, 2 * np.pi, inst.n)
    psi = np.exp(1j * theta)
    power = inst.ao.init_power_fraction * inst.p_max
    gain = inst.willie_gain(psi)
    if gain > 0:
        power = min(power, inst.ao.init_power_fraction * inst.leak_cap / gain)
    W = mrt_precoders(inst.cascaded(psi), power, inst.ao.common_fraction)
    return theta, W


def _run_from(inst: Instance, rng: np.random.Generator, clock: float):
    ao = inst.ao
    theta, W = initial_point(inst, rng)
    if inst.p_max > 0 and np.sum(np.abs(W) ** 2) == 0:
        raise InfeasibleError("leakage budget leaves no transmit power", family="covertness")
    cur = evaluate(inst, W, np.exp(1j * theta))
    trace = OptimizerTrace(ao.eps, ao.j_max, ao.q_max, ao.s_max)
    trace.outer_r_sum.append(cur.r_sum)
    trace.outer_merit.append(cur.merit)
    bs_sub = ris_sub = None
    p_c = None
    for s in range(1, ao.s_max + 1):
        prev = cur.merit
        psi, W_r, _, rec_r, ris_sub = ris_loop(inst, W, np.exp(1j * theta), s, ris_sub, clock)
        theta, W, m, t = restore_unit_modulus(inst, W_r, theta, psi, W_prev=W)
        rec_r.append(TraceRecord(s, len(rec_r) + 1, "ris-projected", m.r_sum, m.merit,
                                 max(m.power - inst.p_max, m.aleph - inst.p_leak, m.slack, 0.0),
                                 m.aleph, 1e3 * (time.perf_counter() - clock)))
        W, p_c, cur, rec_b, bs_sub = bs_loop(inst, np.exp(1j * theta), W, s, bs_sub, clock)
        trace.records += rec_r + rec_b
        trace.inner_counts.append((len(rec_b), len(rec_r) - 1))
        trace.outer_r_sum.append(cur.r_sum)
        trace.outer_merit.append(cur.merit)
        if abs(cur.merit - prev) <= ao.eps:
            break
    return theta, W, p_c, cur.merit, trace


def ao_joint(realization, cfg: SystemConfig, ao: Optional[AOConfig] = None,
             seed: Optional[int] = None) -> AOResult:
    """Alternate the reflection step and the precoder loop until the sum rate stalls.

    With ``ao.n_starts > 1`` the loop is repeated from further random phase
    draws and the run with the best terminal merit is returned.
    """
    ao = ao or AOConfig()
    inst = Instance.build(realization, cfg, ao)
    if seed is None:
        seed = realization.seed if realization.seed is not None else 0
    clock = time.perf_counter()
    best = None
    for start in range(ao.n_starts):
        key = (realization.index, 1) if start == 0 else (realization.index, 1, start)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))
        run = _run_from(inst, rng, clock)
        if best is None or run[3] > best[3]:
            best = run
    theta, W, p_c, _, trace = best
    state = BeamformingState(W[:, 0], W[:, 1:].T, theta, p_c)
    rep = rates(state, realization.user_channels(state.theta), cfg.noise)
    return AOResult(state, rep.R_total, trace, audit_state(state, realization, cfg))
