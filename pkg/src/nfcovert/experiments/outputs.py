"""Result files: versioned CSV, JSON summary and a matplotlib script."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .runner import ROW_COLUMNS, ResultRow, ResultTable
from .spec import ExperimentSpec

CSV_VERSION = "nfcovert.results/1"
DEP_COLUMNS = ("zeta_dbm", "p_fap", "p_mdp", "p_dep", "p_fap_mc", "p_mdp_mc", "p_dep_mc")
OP_COLUMNS = ("p_bs_dbm", "gamma_th_db", "op_closed", "op_mc", "op_union_exact", "K", "N")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(text: str):
    if text == "":
        return ""
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    buf.write(f"# {CSV_VERSION} columns={','.join(ROW_COLUMNS)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROW_COLUMNS)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in ROW_COLUMNS])
    return buf.getvalue()


def csv_to_rows(text: str) -> list:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(f"# {CSV_VERSION}"):
        raise ValueError("not a results CSV of a supported version")
    reader = csv.reader(lines[1:])
    header = next(reader)
    if tuple(header) != ROW_COLUMNS:
        raise ValueError("unexpected CSV header")
    out = []
    for rec in reader:
        d = dict(zip(header, rec))
        out.append(ResultRow(
            kind=d["kind"], sweep_key=d["sweep_key"], sweep_value=_parse(d["sweep_value"]),
            series_key=d["series_key"], series_value=_parse(d["series_value"]),
            seed=_parse(d["seed"]), scheme=d["scheme"], near_field=int(d["near_field"]),
            optimized=int(d["optimized"]), metric=d["metric"], step=int(d["step"]),
            stat=d["stat"], value=float(d["value"])))
    return out


def _pivot(rows: list, metrics: tuple) -> dict:
    table = {}
    for r in rows:
        if r.stat != "value" or r.metric not in metrics:
            continue
        table.setdefault((r.seed, r.series_value, r.sweep_value), {})[r.metric] = r.value
    return table


def dep_csv(table: ResultTable) -> str:
    spec = table.spec
    series = spec.series_key or "series"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("seed", series) + DEP_COLUMNS)
    piv = _pivot(table.rows, DEP_COLUMNS[1:])
    for (seed, sv, z), vals in piv.items():
        w.writerow([seed, _fmt(sv), _fmt(z)] + [_fmt(vals[c]) for c in DEP_COLUMNS[1:]])
    return buf.getvalue()


def op_csv(table: ResultTable) -> str:
    spec = table.spec
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("seed",) + OP_COLUMNS)
    piv = _pivot(table.rows, ("op_closed", "op_mc", "op_union_exact"))
    for (seed, sv, p), vals in piv.items():
        cfg = spec.system_config(None, sv if spec.series_key != "gamma_th_db" else None)
        gamma = sv if spec.series_key == "gamma_th_db" else spec.param("gamma_th_db")
        w.writerow([seed, _fmt(p), _fmt(float(gamma)), _fmt(vals["op_closed"]),
                    _fmt(vals["op_mc"]), _fmt(vals["op_union_exact"]), cfg.n_users, cfg.n_ris])
    return buf.getvalue()


def summary(table: ResultTable) -> dict:
    agg = {}
    for r in table.rows:
        if r.stat == "value":
            continue
        key = f"{r.scheme}|{r.metric}|{r.series_value}|{r.sweep_value}|{r.step}"
        agg.setdefault(key, {})[r.stat] = r.value
    return {
        "schema": "nfcovert.summary/1",
        "spec": table.spec.to_dict(),
        "n_rows": len(table.rows),
        "aggregates": agg,
    }


_PLOT = '''"""Render the {label} figure from results.csv (generated file)."""
import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

KIND = {kind!r}
METRICS = {metrics!r}
here = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent

with open(here / "results.csv") as fh:
    lines = [ln for ln in fh if not ln.startswith("#")]
curves = defaultdict(list)
for row in csv.DictReader(lines):
    if row["stat"] != "mean" or row["metric"] not in METRICS:
        continue
    x = float(row["step"]) if KIND == "convergence" else float(row["sweep_value"])
    label = " ".join(s for s in (row["scheme"], row["metric"], row["series_value"]) if s)
    if KIND == "convergence":
        label += " @ " + row["sweep_value"]
    curves[label].append((x, float(row["value"])))

fig, ax = plt.subplots(figsize=(6, 4))
for label, pts in sorted(curves.items()):
    pts.sort()
    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
ax.set_xlabel({xlabel!r})
ax.set_ylabel({ylabel!r})
{log}ax.grid(True, alpha=0.3)
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(here / "{label}.png", dpi=150)
'''

_PLOT_META = {
    "convergence": (("r_sum_iter",), "outer iteration", "sum rate (bit/s/Hz)", False),
    "rate_vs_distance": (("r_sum",), "distance (m)", "sum rate (bit/s/Hz)", False),
    "rate_vs_N": (("r_sum",), "RIS elements N", "sum rate (bit/s/Hz)", False),
    "rate_vs_power": (("r_sum",), "P_max (dBm)", "sum rate (bit/s/Hz)", False),
    "dep_vs_threshold": (("p_fap", "p_mdp", "p_dep", "p_dep_mc"), "threshold (dBm)",
                         "probability", False),
    "op_vs_power": (("op_closed", "op_mc", "op_union_exact"), "P_bs (dBm)",
                    "outage probability", True),
}


def plot_script(spec: ExperimentSpec) -> str:
    metrics, xlabel, ylabel, log = _PLOT_META[spec.kind]
    return _PLOT.format(label=spec.label, kind=spec.kind, metrics=metrics, xlabel=xlabel,
                        ylabel=ylabel, log='ax.set_yscale("log")\n' if log else "")


def emit_outputs(table: ResultTable, out_dir=None) -> dict:
    """Write every output file; returns name -> path."""
    spec = table.spec
    root = Path(out_dir if out_dir is not None else spec.out_dir) / spec.label
    root.mkdir(parents=True, exist_ok=True)
    files = {"results": root / "results.csv", "summary": root / "summary.json",
             "plot": root / f"plot_{spec.label}.py"}
    files["results"].write_text(rows_to_csv(table.rows))
    files["summary"].write_text(json.dumps(summary(table), sort_keys=True, indent=1) + "\n")
    files["plot"].write_text(plot_script(spec))
    if spec.kind == "dep_vs_threshold":
        files["dep"] = root / "dep_sweep.csv"
        files["dep"].write_text(dep_csv(table))
    if spec.kind == "op_vs_power":
        files["op"] = root / "op_sweep.csv"
        files["op"].write_text(op_csv(table))
    if table.traces:
        tdir = root / "traces"
        tdir.mkdir(exist_ok=True)
        for name, text in sorted(table.traces.items()):
            (tdir / f"{name}.csv").write_text(text)
    return files
