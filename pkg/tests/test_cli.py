import csv
import io
import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from hausgauss.cli import (DEFAULT_TOL, EXIT_FAIL, EXIT_OK, EXIT_USAGE, ResultTable, RunConfig,
                           UsageError, main, parse_n, parse_n_token)
from hausgauss.dimension import HENSLEY_LIMIT


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(out):
    lines = [l for l in out.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def meta(out):
    return {l[2:].split("=", 1)[0]: json.loads(l[2:].split("=", 1)[1])
            for l in out.splitlines() if l.startswith("# ")}


def test_dim_gauss_extrapolates_to_hensley(capsys):
    code, out, _ = run(capsys, "dim", "--kind", "gauss", "--n", "2..256", "--geometric")
    assert code == EXIT_OK
    rows = table(out)
    assert [int(r["n"]) for r in rows] == [2, 4, 8, 16, 32, 64, 128, 256]
    assert math.isnan(float(rows[0]["extrapolation"]))
    assert abs(float(rows[-1]["extrapolation"]) / HENSLEY_LIMIT - 1) < 0.02


def test_dim_linear_degenerate_row(capsys):
    code, out, _ = run(capsys, "dim", "--kind", "linear", "--n", "1")
    rows = table(out)
    assert code == EXIT_OK and len(rows) == 1
    assert float(rows[0]["h_n"]) == 0.0 and rows[0]["degenerate"] == "1"
    assert "chi" in meta(out)


def test_dim_deterministic_bytes(capsys):
    args = ("dim", "--kind", "gauss", "--n", "2,3,5")
    assert run(capsys, *args)[1] == run(capsys, *args)[1]


def test_dim_jobs_do_not_change_rows(capsys):
    one = run(capsys, "dim", "--kind", "gauss", "--n", "2,3,5,7")[1]
    two = run(capsys, "dim", "--kind", "gauss", "--n", "2,3,5,7", "--jobs", "2")[1]
    assert table(one) == table(two)


def test_measure_linear_two(capsys):
    code, out, _ = run(capsys, "measure", "--kind", "linear", "--n", "2")
    assert code == EXIT_OK
    assert float(table(out)[0]["H_upper"]) < 0.79


def test_measure_empty_family_override(capsys):
    code, out, _ = run(capsys, "measure", "--kind", "gauss", "--n", "4", "--families", "none", "--explain")
    rows = table(out)
    assert code == EXIT_OK and len(rows) == 1
    assert rows[0]["witness_family"] == "fallback"
    assert rows[0]["ratio_a"] == "nan"


def test_measure_linear_trend(capsys):
    code, out, _ = run(capsys, "measure", "--kind", "linear", "--n", "64..4096", "--geometric")
    vals = [float(r["normalized"]) for r in table(out)]
    assert code == EXIT_OK and len(vals) == 7
    assert all(v >= u - 0.02 for u, v in zip(vals, vals[1:]))


def test_operator_unperturbed_and_halving(capsys):
    code, out, _ = run(capsys, "operator", "--t", "1", "--n", "inf,100,200,400,800")
    rows = table(out)
    assert code == EXIT_OK
    assert rows[0]["n"] == "inf" and abs(float(rows[0]["lambda"]) - 1) < 1e-10
    d = [float(r["abs_lambda_minus_1"]) for r in rows[1:]]
    assert all(0.8 < 2 * v / u < 1.2 for u, v in zip(d, d[1:]))
    assert all(float(r["probe"]) <= float(r["bound"]) for r in rows[1:])


def test_verify_default_and_tightened(capsys):
    code, out, err = run(capsys, "verify")
    assert code == EXIT_OK and meta(out)["assertions"] > 0 and meta(out)["failures"] == 0
    assert "checks passed" in err
    code, out, _ = run(capsys, "verify", "--tol", "eigen=1e-13")
    tele = [r for r in table(out) if r["check"].startswith("telescoping")]
    assert code == EXIT_OK and tele[0]["status"] == "PASS"


def test_verify_fault_injection(capsys):
    code, out, _ = run(capsys, "verify", "--h-error", "1e-3")
    stale = [r for r in table(out) if "StaleDimension" in r["check"]]
    assert code == EXIT_FAIL and len(stale) == 4


def test_json_output(capsys):
    code, out, _ = run(capsys, "dim", "--kind", "linear", "--n", "1,2", "--format", "json")
    doc = json.loads(out)
    assert code == EXIT_OK and doc["columns"][0] == "n"
    assert doc["rows"][0][4] is None  # no extrapolation from one point
    assert RunConfig.from_echo(doc["metadata"]["config"]).n == (1, 2)


def test_out_file(tmp_path, capsys):
    path = tmp_path / "t.csv"
    code, out, _ = run(capsys, "dim", "--kind", "linear", "--n", "3", "--out", str(path))
    assert code == EXIT_OK and out == ""
    assert "h_n" in path.read_text()


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("kind = linear\nn = 2..5\ntol.moran = 1e-12  # looser\n")
    code, out, _ = run(capsys, "dim", "--config", str(cfg), "--n", "7")
    m = meta(out)["config"]
    assert code == EXIT_OK and m["kind"] == "linear" and m["n"] == [7]
    assert m["tol"]["moran"] == 1e-12


@pytest.mark.parametrize("argv", [
    ["dim", "--n", "0"],
    ["dim", "--n", "5..2"],
    ["dim", "--n", "inf"],
    ["dim", "--grid", "4"],
    ["dim", "--tol", "eigen=-1"],
    ["measure", "--n", "1"],
    ["operator", "--t", "0.5", "--n", "inf"],
])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == EXIT_USAGE


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert run(capsys, "dim", "--config", str(cfg))[0] == EXIT_USAGE


def test_sweep_linear(capsys):
    code, out, _ = run(capsys, "sweep", "--kind", "linear", "--n", "1..300")
    rows = table(out)
    assert code == EXIT_OK and len(rows) == 300
    assert max(abs(float(r["residual"])) for r in rows) < 1e-12


def test_result_table_row_width():
    t = ResultTable(["a", "b"])
    with pytest.raises(ValueError):
        t.add(1)


def test_parse_n_forms():
    assert parse_n("5") == (5,)
    assert parse_n("2,4,8") == (2, 4, 8)
    assert parse_n("3..6") == (3, 4, 5, 6)
    assert parse_n("4..256", geometric=True) == (4, 8, 16, 32, 64, 128, 256)
    assert parse_n_token("inf") == math.inf
    with pytest.raises(UsageError):
        parse_n_token("x")


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 10 ** 6), st.integers(0, 10 ** 4))
def test_range_lengths(a, extra):
    if extra <= 1000:
        assert len(parse_n(f"{a}..{a + extra}")) == extra + 1
    g = parse_n(f"{a}..{a + extra}", geometric=True)
    assert g[0] == a and g[-1] <= a + extra < 2 * g[-1]


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(["dim", "measure", "operator"]), st.sampled_from(["linear", "gauss"]),
       st.lists(st.integers(1, 5000), min_size=1, max_size=5), st.integers(16, 128),
       st.integers(0, 2 ** 63), st.floats(1e-14, 1e-6))
def test_config_echo_round_trip(cmd, kind, ns, grid, seed, tol):
    cfg = RunConfig(cmd, kind=kind, n=tuple(ns), grid=grid, seed=seed,
                    tol={**DEFAULT_TOL, "eigen": tol})
    echo = json.loads(json.dumps(cfg.echo()))
    assert RunConfig.from_echo(echo) == cfg
