"""Experiment execution: one task per (grid point, seed), reduced in order."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from typing import Optional

import numpy as np

from ..channel import ArrayGeometry, element_distances, realize
from ..config import db_to_linear, dbm_to_watt, free_space_gain
from ..covertness import (CovertnessParams, dep_closed_form, dep_monte_carlo,
                          false_alarm_probability, leakage_budget,
                          missed_detection_probability)
from ..optimizer import ao_joint, baseline_beamformers
from ..outage import OutageModel, PowerSplit, outage_monte_carlo
from ..rsma import rates
from .spec import ExperimentSpec


@dataclass(frozen=True)
class ResultRow:
    kind: str
    sweep_key: str
    sweep_value: object
    series_key: str
    series_value: object
    seed: object            # int, or "all" on aggregate rows
    scheme: str
    near_field: int
    optimized: int
    metric: str
    step: int
    stat: str               # value | mean | std | n
    value: float


ROW_COLUMNS = tuple(f.name for f in fields(ResultRow))


@dataclass
class ResultTable:
    spec: ExperimentSpec
    rows: list
    traces: dict            # name -> CSV text (timed, not deterministic)

    def values(self, metric: str, scheme: Optional[str] = None, stat: str = "value") -> list:
        return [r for r in self.rows if r.metric == metric and r.stat == stat
                and (scheme is None or r.scheme == scheme)]

    def curve(self, metric: str, scheme: str, series_value=None, step: int = -1):
        """Seed-mean ``(sweep_values, means)`` for one scheme and series."""
        pts = [(r.sweep_value, r.value) for r in self.rows
               if r.metric == metric and r.scheme == scheme and r.stat == "mean"
               and r.series_value == _norm(series_value) and r.step == step]
        order = {v: i for i, v in enumerate(self.spec.sweep_values)}
        pts.sort(key=lambda p: order.get(p[0], 0))
        return [p[0] for p in pts], np.array([p[1] for p in pts])


def _norm(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(v)


def _flags(scheme: str) -> tuple[int, int]:
    if scheme in ("nf_opt", "ff_opt", "nf_base", "ff_base"):
        return int(scheme.startswith("nf")), int(scheme.endswith("opt"))
    return 1, 0


def _row(spec, sweep_value, series_value, seed, scheme, metric, value, step=-1):
    nf, opt = _flags(scheme)
    return ResultRow(spec.kind, spec.sweep_key, _norm(sweep_value), spec.series_key or "",
                     _norm(series_value), int(seed), scheme, nf, opt, metric, int(step),
                     "value", float(value))


# -- task bodies --------------------------------------------------------------

def _rate_task(spec: ExperimentSpec, sweep_value, series_value, seed):
    cfg = spec.system_config(sweep_value, series_value)
    ao = spec.ao_config()
    rows, traces = [], {}
    for scheme in spec.schemes:
        near, optimized = _flags(scheme)
        r = realize(cfg, seed, far_field=not near)
        if optimized:
            res = ao_joint(r, cfg, ao)
            state = res.state
            rows.append(_row(spec, sweep_value, series_value, seed, scheme, "feasible",
                             float(res.feasible)))
            rows.append(_row(spec, sweep_value, series_value, seed, scheme, "iterations",
                             res.trace.n_outer))
            if spec.kind == "convergence":
                for s, value in enumerate(res.trace.outer_r_sum):
                    rows.append(_row(spec, sweep_value, series_value, seed, scheme,
                                     "r_sum_iter", value, step=s))
            if spec.write_traces:
                traces[f"{scheme}_{_norm(sweep_value)}_{_norm(series_value)}_{seed}"] = \
                    res.trace.to_csv(with_time=True)
        else:
            state = baseline_beamformers(r, cfg)
        rep = rates(state, r.user_channels(state.theta), cfg.noise)
        params = CovertnessParams(cfg.rho, cfg.willie_noise, cfg.varsigma)
        aleph = state.power * float(np.sum(np.abs(r.willie_channel(state.theta)) ** 2))
        rows += [
            _row(spec, sweep_value, series_value, seed, scheme, "r_sum", rep.R_total),
            _row(spec, sweep_value, series_value, seed, scheme, "r_bob",
                 rep.p_c[0] + rep.R_p[0]),
            _row(spec, sweep_value, series_value, seed, scheme, "leak_ratio",
                 aleph / leakage_budget(params)),
        ]
    return rows, traces


def _dep_task(spec: ExperimentSpec, series_value, seed, series_index):
    cfg = spec.system_config(None, series_value)
    ratio = series_value if spec.series_key == "aleph_ratio" else spec.param("aleph_ratio")
    params = CovertnessParams(cfg.rho, cfg.willie_noise, cfg.varsigma)
    aleph = float(ratio) * cfg.willie_noise
    zeta = dbm_to_watt(np.asarray(spec.sweep_values, dtype=float))
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(7, series_index)))
    fa_mc, md_mc, dep_mc = dep_monte_carlo(zeta, aleph, params, rng, int(spec.param("n_mc")))
    fa = false_alarm_probability(zeta, params)
    md = missed_detection_probability(zeta, aleph, params)
    dep = dep_closed_form(zeta, aleph, params)
    rows = []
    for i, z in enumerate(spec.sweep_values):
        for name, arr in (("p_fap", fa), ("p_mdp", md), ("p_dep", dep), ("p_fap_mc", fa_mc),
                          ("p_mdp_mc", md_mc), ("p_dep_mc", dep_mc)):
            rows.append(_row(spec, z, series_value, seed, "analysis", name, arr[i]))
    return rows, {}


def _op_task(spec: ExperimentSpec, series_value, seed, series_index):
    cfg = spec.system_config(None, series_value)
    gamma_db = series_value if spec.series_key == "gamma_th_db" else spec.param("gamma_th_db")
    gamma = float(db_to_linear(float(gamma_db)))
    geom = ArrayGeometry.from_config(cfg)
    r_kn = element_distances(geom, float(cfg.user_distances[0]))
    sigma_br2 = free_space_gain(cfg.bs_ris_distance, cfg.wavelength)
    model = OutageModel.from_geometry(r_kn, cfg.wavelength, sigma_br2, cfg.noise, gamma, gamma)
    rows = []
    for i, p_dbm in enumerate(spec.sweep_values):
        split = PowerSplit.equal_private(float(spec.param("alpha_c")), cfg.n_users,
                                         float(dbm_to_watt(float(p_dbm))))
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                           spawn_key=(11, series_index, i)))
        est = outage_monte_carlo(split, model, rng, int(spec.param("n_mc")))
        for name, v in (("op_closed", est.approx), ("op_mc", est.p_out),
                        ("op_union_exact", est.union_exact), ("f_c_mc", est.f_c),
                        ("f_p_mc", est.f_p)):
            rows.append(_row(spec, p_dbm, series_value, seed, "analysis", name, v))
    return rows, {}


def _run_task(args):
    spec, kind, sweep_value, series_value, seed, series_index = args
    if kind == "dep_vs_threshold":
        return _dep_task(spec, series_value, seed, series_index)
    if kind == "op_vs_power":
        return _op_task(spec, series_value, seed, series_index)
    return _rate_task(spec, sweep_value, series_value, seed)


def tasks(spec: ExperimentSpec) -> list[tuple]:
    """Task list in (grid, seed) order."""
    out = []
    for si, sv in enumerate(spec.series_values):
        if spec.kind in ("dep_vs_threshold", "op_vs_power"):
            # the whole sweep shares one batch of draws per (series, seed)
            for seed in spec.seeds:
                out.append((spec, spec.kind, None, sv, seed, si))
            continue
        for v in spec.sweep_values:
            for seed in spec.seeds:
                out.append((spec, spec.kind, v, sv, seed, si))
    return out


def aggregate(rows: list) -> list:
    """Mean/std/count over seeds; independent of row order."""
    groups = {}
    for r in rows:
        if r.stat != "value":
            continue
        key = (r.kind, r.sweep_key, r.sweep_value, r.series_key, r.series_value, r.scheme,
               r.near_field, r.optimized, r.metric, r.step)
        groups.setdefault(key, []).append((r.seed, r.value))
    out = []
    for key, vals in groups.items():
        v = [x for _, x in sorted(vals)]
        n = len(v)
        mean = math.fsum(v) / n
        std = math.sqrt(math.fsum((x - mean) ** 2 for x in v) / n)
        for stat, value in (("mean", mean), ("std", std), ("n", float(n))):
            out.append(ResultRow(*key[:5], "all", *key[5:], stat, value))
    return out


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> ResultTable:
    jobs = tasks(spec)
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_task, jobs))
    else:
        results = [_run_task(j) for j in jobs]
    rows, traces = [], {}
    for r, t in results:
        rows += r
        traces.update(t)
    rows += aggregate(rows)
    return ResultTable(spec, rows, traces)


def row_tuple(row: ResultRow) -> tuple:
    return astuple(row)
