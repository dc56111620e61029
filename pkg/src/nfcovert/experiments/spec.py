"""Scenario files: YAML experiment specifications and their validation."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from ..config import AOConfig, SystemConfig

KINDS = ("convergence", "rate_vs_distance", "rate_vs_N", "rate_vs_power",
         "dep_vs_threshold", "op_vs_power")

SCHEMES = ("nf_opt", "ff_opt", "nf_base", "ff_base")

# sweep keys each kind understands; "None" allows any SystemConfig field
SWEEP_KEYS = {
    "convergence": ("n_ris", "p_max_dbm", "m_bs"),
    "rate_vs_distance": ("willie_distance", "user_distance_min", "user_distance_max",
                         "bs_ris_distance"),
    "rate_vs_N": ("n_ris",),
    "rate_vs_power": ("p_max_dbm",),
    "dep_vs_threshold": ("zeta_dbm",),
    "op_vs_power": ("p_bs_dbm",),
}

SERIES_KEYS = {
    "convergence": ("n_ris", "m_bs"),
    "rate_vs_distance": ("n_ris", "m_bs", "p_max_dbm"),
    "rate_vs_N": ("m_bs", "p_max_dbm"),
    "rate_vs_power": ("n_ris", "m_bs"),
    "dep_vs_threshold": ("aleph_ratio", "rho"),
    "op_vs_power": ("gamma_th_db",),
}

PAPER_SCALE_N = 128

_TOP_KEYS = {"kind", "name", "seeds", "sweep", "series", "config", "optimizer", "schemes",
             "out_dir", "paper_scale", "params", "write_traces"}

_PARAM_DEFAULTS = {
    "dep_vs_threshold": {"n_mc": 100_000, "aleph_ratio": 0.5},
    "op_vs_power": {"n_mc": 100_000, "gamma_th_db": -10.0, "alpha_c": 0.2},
}


class SpecError(ValueError):
    """Invalid scenario file; carries the offending key and source line."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    seeds: tuple
    sweep_key: str
    sweep_values: tuple
    name: str = ""
    series_key: Optional[str] = None
    series_values: tuple = (None,)
    config: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    schemes: tuple = ("nf_opt",)
    out_dir: str = "results"
    paper_scale: bool = False
    params: dict = field(default_factory=dict)
    write_traces: bool = False

    @property
    def label(self) -> str:
        return self.name or self.kind

    def system_config(self, sweep_value=None, series_value=None) -> SystemConfig:
        over = dict(self.config)
        valid = {f.name for f in fields(SystemConfig)}
        for key, value in ((self.sweep_key, sweep_value), (self.series_key, series_value)):
            if key in valid and value is not None:
                over[key] = value
        return SystemConfig().with_overrides(over)

    def ao_config(self) -> AOConfig:
        return AOConfig().with_overrides(self.optimizer)

    def param(self, key: str):
        if key in self.params:
            return self.params[key]
        return _PARAM_DEFAULTS.get(self.kind, {}).get(key)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind, "name": self.name, "seeds": list(self.seeds),
            "sweep": {"key": self.sweep_key, "values": list(self.sweep_values)},
            "config": dict(self.config), "optimizer": dict(self.optimizer),
            "schemes": list(self.schemes), "out_dir": self.out_dir,
            "paper_scale": self.paper_scale, "params": dict(self.params),
            "write_traces": self.write_traces,
        }
        if self.series_key is not None:
            d["series"] = {"key": self.series_key, "values": list(self.series_values)}
        return d

    def replace(self, **kw) -> "ExperimentSpec":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(kw)
        return validate(ExperimentSpec(**d))


def _line_map(text: str) -> dict:
    """Map dotted key paths to 1-based source lines."""
    out = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                out[path] = k.start_mark.line + 1
                walk(v, path)

    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return out
    if root is not None:
        walk(root, "")
    return out


def _grid(value, key: str, lines: dict):
    """A list, or ``{start, stop, step}`` / ``{start, stop, num}``."""
    if isinstance(value, dict):
        try:
            start, stop = float(value["start"]), float(value["stop"])
        except (KeyError, TypeError, ValueError):
            raise SpecError("range needs numeric start and stop", key, lines.get(key))
        if "num" in value:
            return tuple(float(x) for x in np.linspace(start, stop, int(value["num"])))
        if "step" in value:
            step = float(value["step"])
            if step <= 0:
                raise SpecError("step must be positive", key, lines.get(key))
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return tuple(float(start + i * step) for i in range(n))
        raise SpecError("range needs num or step", key, lines.get(key))
    if isinstance(value, (list, tuple)):
        return tuple(value)
    if isinstance(value, (int, float)):
        return (value,)
    raise SpecError("grid must be a list or a range mapping", key, lines.get(key))


def parse_spec(text: str, source: str = "<spec>", paper_scale: bool = False,
               seeds=None) -> ExperimentSpec:
    """Parse and validate; ``paper_scale`` and ``seeds`` override the file."""
    override_seeds = seeds
    lines = _line_map(text)
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SpecError(f"{source}: YAML parse error", None,
                        mark.line + 1 if mark is not None else None) from exc
    if not isinstance(doc, dict):
        raise SpecError(f"{source}: top level must be a mapping", None, 1)
    for key in doc:
        if key not in _TOP_KEYS:
            raise SpecError("unknown key", str(key), lines.get(str(key)))
    if "kind" not in doc:
        raise SpecError("missing kind", "kind", None)
    sweep = doc.get("sweep")
    if not isinstance(sweep, dict) or "key" not in sweep or "values" not in sweep:
        raise SpecError("sweep needs key and values", "sweep", lines.get("sweep"))
    series = doc.get("series")
    series_key, series_values = None, (None,)
    if series is not None:
        if not isinstance(series, dict) or "key" not in series or "values" not in series:
            raise SpecError("series needs key and values", "series", lines.get("series"))
        series_key = str(series["key"])
        series_values = _grid(series["values"], "series.values", lines)
    seeds = doc.get("seeds", [])
    if isinstance(seeds, dict):
        seeds = [int(s) for s in _grid(seeds, "seeds", lines)]
    if not isinstance(seeds, (list, tuple)):
        raise SpecError("seeds must be a list", "seeds", lines.get("seeds"))
    for name in ("config", "optimizer", "params"):
        if not isinstance(doc.get(name, {}) or {}, dict):
            raise SpecError("must be a mapping", name, lines.get(name))
    spec = ExperimentSpec(
        kind=str(doc["kind"]), name=str(doc.get("name", "")),
        seeds=tuple(seeds) if override_seeds is None else tuple(override_seeds), sweep_key=str(sweep["key"]),
        sweep_values=_grid(sweep["values"], "sweep.values", lines),
        series_key=series_key, series_values=series_values,
        config=dict(doc.get("config") or {}), optimizer=dict(doc.get("optimizer") or {}),
        schemes=tuple(doc.get("schemes", ("nf_opt",))), out_dir=str(doc.get("out_dir", "results")),
        paper_scale=bool(doc.get("paper_scale", False)) or paper_scale,
        params=dict(doc.get("params") or {}),
        write_traces=bool(doc.get("write_traces", False)))
    return validate(spec, lines)


def load_spec(path, paper_scale: bool = False, seeds=None) -> ExperimentSpec:
    path = Path(path)
    return parse_spec(path.read_text(), str(path), paper_scale, seeds)


def validate(spec: ExperimentSpec, lines: Optional[dict] = None) -> ExperimentSpec:
    lines = lines or {}
    if spec.kind not in KINDS:
        raise SpecError(f"unknown kind '{spec.kind}'", "kind", lines.get("kind"))
    if not spec.seeds:
        raise SpecError("seed list is empty", "seeds", lines.get("seeds"))
    for s in spec.seeds:
        if isinstance(s, bool) or not isinstance(s, (int, np.integer)) or s < 0:
            raise SpecError("seeds must be non-negative integers", "seeds", lines.get("seeds"))
    if len(set(spec.seeds)) != len(spec.seeds):
        raise SpecError("seeds must be distinct", "seeds", lines.get("seeds"))
    if spec.sweep_key not in SWEEP_KEYS[spec.kind]:
        raise SpecError(f"sweep key must be one of {SWEEP_KEYS[spec.kind]}", "sweep.key",
                        lines.get("sweep.key"))
    if not spec.sweep_values:
        raise SpecError("sweep grid is empty", "sweep.values", lines.get("sweep.values"))
    if spec.series_key is not None:
        if spec.series_key not in SERIES_KEYS[spec.kind]:
            raise SpecError(f"series key must be one of {SERIES_KEYS[spec.kind]}", "series.key",
                            lines.get("series.key"))
        if not spec.series_values:
            raise SpecError("series grid is empty", "series.values", lines.get("series.values"))
    for s in spec.schemes:
        if s not in SCHEMES:
            raise SpecError(f"unknown scheme '{s}'", "schemes", lines.get("schemes"))
    if not spec.schemes:
        raise SpecError("no schemes selected", "schemes", lines.get("schemes"))
    # overrides must name real fields and produce valid configs
    for key in spec.config:
        if key not in {f.name for f in fields(SystemConfig)}:
            raise SpecError("unknown config field", f"config.{key}", lines.get(f"config.{key}"))
    for key in spec.optimizer:
        if key not in {f.name for f in fields(AOConfig)}:
            raise SpecError("unknown optimizer field", f"optimizer.{key}",
                            lines.get(f"optimizer.{key}"))
    try:
        for v in spec.sweep_values:
            for sv in spec.series_values:
                spec.system_config(v, sv)
        spec.ao_config()
    except (ValueError, TypeError) as exc:
        raise SpecError(f"invalid override: {exc}", "config", lines.get("config")) from exc
    sizes = [spec.system_config(v, sv).n_ris for v in spec.sweep_values
             for sv in spec.series_values]
    if max(sizes) > PAPER_SCALE_N and not spec.paper_scale:
        raise SpecError(f"N > {PAPER_SCALE_N} needs --paper-scale", "sweep.values",
                        lines.get("sweep.values"))
    return spec


def warn_paper_scale(spec: ExperimentSpec) -> bool:
    sizes = [spec.system_config(v, sv).n_ris for v in spec.sweep_values
             for sv in spec.series_values]
    if max(sizes) > PAPER_SCALE_N:
        warnings.warn(f"paper-scale run (N up to {max(sizes)}): expect minutes per instance",
                      RuntimeWarning, stacklevel=2)
        return True
    return False


def dump_spec(spec: ExperimentSpec) -> str:
    return yaml.safe_dump(spec.to_dict(), sort_keys=True)
