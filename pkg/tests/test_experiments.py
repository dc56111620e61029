import random
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nfcovert.experiments import (KINDS, ResultRow, aggregate, csv_to_rows, emit_outputs,
                                  parse_spec, rows_to_csv, run_experiment)
from nfcovert.experiments.cli import main
from nfcovert.experiments.runner import ResultTable
from nfcovert.experiments.spec import SpecError

RATE = """kind: rate_vs_power
seeds: [0, 1]
sweep: {key: p_max_dbm, values: [20, 30]}
config: {n_ris: 8, n_users: 2}
optimizer: {s_max: 2}
schemes: [nf_opt, nf_base]
"""


def spec_file(tmp_path, text, name="spec.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- validation ---------------------------------------------------------------

def test_empty_seed_list_is_rejected():
    with pytest.raises(SpecError) as err:
        parse_spec(RATE.replace("seeds: [0, 1]", "seeds: []"))
    assert err.value.key == "seeds" and err.value.line == 2


def test_duplicate_seeds_rejected():
    with pytest.raises(SpecError):
        parse_spec(RATE.replace("[0, 1]", "[1, 1]"))


def test_unknown_kind_and_key_report_line():
    with pytest.raises(SpecError) as err:
        parse_spec(RATE.replace("rate_vs_power", "rate_vs_moon"))
    assert err.value.key == "kind" and err.value.line == 1
    with pytest.raises(SpecError) as err:
        parse_spec(RATE + "colour: red\n")
    assert err.value.key == "colour" and err.value.line == 7


def test_bad_override_names_field():
    with pytest.raises(SpecError) as err:
        parse_spec(RATE.replace("n_users: 2", "n_userz: 2"))
    assert err.value.key == "config.n_userz" and err.value.line == 4


def test_yaml_error_has_line():
    with pytest.raises(SpecError) as err:
        parse_spec("kind: [\n")
    assert err.value.line is not None


def test_large_ris_needs_paper_scale():
    text = RATE.replace("sweep: {key: p_max_dbm, values: [20, 30]}",
                        "sweep: {key: p_max_dbm, values: [30]}").replace("n_ris: 8", "n_ris: 256")
    with pytest.raises(SpecError):
        parse_spec(text)
    assert parse_spec(text, paper_scale=True).paper_scale


def test_range_grid_and_seed_override():
    spec = parse_spec(RATE.replace("[20, 30]", "{start: 10, stop: 35, step: 5}"), seeds=[4])
    assert spec.sweep_values == (10, 15, 20, 25, 30, 35) and spec.seeds == (4,)


def test_shipped_specs_validate():
    import pathlib
    root = pathlib.Path(__file__).resolve().parents[1] / "scripts" / "specs"
    files = sorted(root.glob("*.yaml"))
    assert files
    for f in files:
        assert main(["validate", str(f), "--paper-scale"]) == 0


# -- CLI ----------------------------------------------------------------------

def test_cli_list_kinds(capsys):
    assert main(["list-kinds"]) == 0
    out = capsys.readouterr().out
    assert all(k in out for k in KINDS)


def test_cli_exit_codes(tmp_path, capsys):
    good = spec_file(tmp_path, RATE)
    assert main(["validate", str(good)]) == 0
    bad = spec_file(tmp_path, RATE.replace("seeds: [0, 1]", "seeds: []"), "bad.yaml")
    assert main(["validate", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["validate", str(tmp_path / "missing.yaml")]) == 2


def test_cli_runtime_failure_exit_code(tmp_path, monkeypatch):
    import nfcovert.experiments.cli as cli

    def fail(*a, **k):
        raise RuntimeError("solver crashed")

    monkeypatch.setattr(cli, "run_experiment", fail)
    f = spec_file(tmp_path, RATE)
    assert main(["run", str(f), "--out-dir", str(tmp_path / "o")]) == 3


def test_cli_run_writes_files(tmp_path):
    f = spec_file(tmp_path, RATE.replace("[0, 1]", "[0]"))
    assert main(["run", str(f), "--out-dir", str(tmp_path / "out")]) == 0
    d = tmp_path / "out" / "rate_vs_power"
    assert (d / "results.csv").exists() and (d / "summary.json").exists()
    assert (d / "plot_rate_vs_power.py").exists()
    compile((d / "plot_rate_vs_power.py").read_text(), "plot", "exec")


# -- outputs ------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_table():
    return run_experiment(parse_spec(RATE))


def test_csv_round_trip(small_table):
    text = rows_to_csv(small_table.rows)
    assert text.startswith("# nfcovert.results/1 columns=")
    assert csv_to_rows(text) == small_table.rows


def test_empty_table_gives_header_only():
    text = rows_to_csv([])
    assert len(text.splitlines()) == 2 and csv_to_rows(text) == []


def test_reruns_are_byte_identical(tmp_path, small_table):
    again = run_experiment(parse_spec(RATE))
    a = emit_outputs(small_table, tmp_path / "a")
    b = emit_outputs(again, tmp_path / "b")
    for key in ("results", "summary", "plot"):
        assert a[key].read_bytes() == b[key].read_bytes()


def test_parallel_matches_serial(small_table):
    par = run_experiment(parse_spec(RATE), threads=2)
    assert rows_to_csv(par.rows) == rows_to_csv(small_table.rows)


def test_rows_cover_grid(small_table):
    rows = small_table.values("r_sum")
    assert {(r.sweep_value, r.seed, r.scheme) for r in rows} == {
        (p, s, sch) for p in (20, 30) for s in (0, 1) for sch in ("nf_opt", "nf_base")}
    means = [r for r in small_table.rows if r.metric == "r_sum" and r.stat == "mean"]
    assert len(means) == 4


def _row(seed, value, metric="m"):
    return ResultRow("rate_vs_power", "p", 1, "", "", seed, "nf_opt", 1, 1, metric, -1,
                     "value", value)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=12), st.integers(0, 1000))
def test_aggregation_order_independent(values, shuffle_seed):
    rows = [_row(i, v) for i, v in enumerate(values)]
    shuffled = rows[:]
    random.Random(shuffle_seed).shuffle(shuffled)
    a, b = aggregate(rows), aggregate(shuffled)
    assert a == b
    mean = next(r.value for r in a if r.stat == "mean")
    assert mean == pytest.approx(np.mean(values), abs=1e-9)


# -- kind-specific checks -----------------------------------------------------

def test_dep_columns_monotone():
    spec = parse_spec("""kind: dep_vs_threshold
seeds: [0]
sweep: {key: zeta_dbm, values: {start: -125, stop: -113, num: 25}}
series: {key: aleph_ratio, values: [0.2, 1.0]}
params: {n_mc: 20000}
""")
    table = run_experiment(spec)
    for ratio in (0.2, 1.0):
        fap = [r.value for r in table.rows if r.metric == "p_fap" and r.stat == "value"
               and r.series_value == ratio]
        mdp = [r.value for r in table.rows if r.metric == "p_mdp" and r.stat == "value"
               and r.series_value == ratio]
        assert np.all(np.diff(fap) <= 1e-15) and np.all(np.diff(mdp) >= -1e-15)


def test_registry_smoke():
    specs = {
        "convergence": "sweep: {key: n_ris, values: [8, 16]}\noptimizer: {s_max: 3}",
        "rate_vs_distance": "sweep: {key: willie_distance, values: [2, 6]}\n"
                            "config: {n_ris: 16}\noptimizer: {s_max: 2}",
        "rate_vs_N": "sweep: {key: n_ris, values: [8, 16]}\noptimizer: {s_max: 2}\n"
                     "schemes: [nf_opt, ff_base]",
        "rate_vs_power": "sweep: {key: p_max_dbm, values: [20, 30]}\nconfig: {n_ris: 16}\n"
                         "optimizer: {s_max: 2}",
        "dep_vs_threshold": "sweep: {key: zeta_dbm, values: [-122, -120, -118]}\n"
                            "params: {n_mc: 10000}",
        "op_vs_power": "sweep: {key: p_bs_dbm, values: [30, 50, 70]}\nconfig: {n_ris: 16}\n"
                       "params: {n_mc: 10000}",
    }
    assert set(specs) == set(KINDS)
    t0 = time.perf_counter()
    for kind, body in specs.items():
        table = run_experiment(parse_spec(f"kind: {kind}\nseeds: [0, 1]\n{body}\n"))
        assert isinstance(table, ResultTable) and table.rows
        assert any(r.stat == "mean" for r in table.rows)
    assert time.perf_counter() - t0 < 60


def test_convergence_rows_have_steps():
    table = run_experiment(parse_spec(
        "kind: convergence\nseeds: [0]\nsweep: {key: n_ris, values: [8]}\n"
        "optimizer: {s_max: 3}\nwrite_traces: true\n"))
    steps = [r.step for r in table.rows if r.metric == "r_sum_iter" and r.stat == "value"]
    assert steps == list(range(len(steps))) and len(steps) >= 2
    assert table.traces
