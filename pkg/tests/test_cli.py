import csv
import io
import json
import math
import subprocess
import sys

import pytest

from gibbs_certify import cli
from gibbs_certify import exact_oracle as eo
from gibbs_certify import observable as ob
from gibbs_certify import spin_model as sm


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(data if isinstance(data, str) else json.dumps(data))
    return str(p)


def chain_files(tmp_path, n, beta, sites, kind="chain"):
    m = write(tmp_path, "model.json", {"lattice": {"type": kind, "n": n},
                                       "model": {"type": "ising_ferro", "beta": beta}})
    o = write(tmp_path, "obs.json", {"type": "spin_product", "sites": sites})
    return m, o


def run(argv):
    out = io.StringIO()
    code = cli.main(argv, stdout=out)
    return code, out.getvalue()


def csv_rows(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(body))


def test_bound_zero_beta(tmp_path):
    m, o = chain_files(tmp_path, 8, 0.0, [3, 4])
    code, out = run(["bound", "--model", m, "--observable", o, "--radius", "1", "--hierarchy", "dlr"])
    assert code == 0
    (row,) = csv_rows(out)
    assert tuple(row) == cli.CSV_COLUMNS
    assert float(row["p_min"]) == 0.0 and float(row["p_max"]) == 0.0 and float(row["width"]) == 0.0


def test_bound_full_region(tmp_path):
    m, o = chain_files(tmp_path, 8, 0.7, [3, 4], "cycle")
    code, out = run(["bound", "--model", m, "--observable", o, "--radius", "4"])
    assert code == 0
    mu = eo.expectation(sm.cycle(8, 0.7), ob.spin_product([3, 4]))
    rows = csv_rows(out)
    assert [r["hierarchy"] for r in rows] == ["dlr", "mc"]
    for r in rows:
        assert float(r["width"]) <= 1e-7
        assert 0.5 * (float(r["p_min"]) + float(r["p_max"])) == pytest.approx(mu, abs=1e-7)


def test_report_header(tmp_path):
    m, o = chain_files(tmp_path, 8, 0.3, [3])
    _, out = run(["bound", "--model", m, "--observable", o])
    assert "# beta: 0.3" in out
    assert "fast mixing (Delta*tanh(beta*J) < 1): yes" in out
    assert "feas_tol=1e-08" in out


def test_strict_widens(tmp_path):
    m, o = chain_files(tmp_path, 10, 0.8, [4])
    base = ["bound", "--model", m, "--observable", o, "--radius", "2", "--hierarchy", "dlr",
            "--dlr-method", "raw"]
    (plain,) = csv_rows(run(base)[1])
    (strict,) = csv_rows(run(base + ["--strict"])[1])
    # closure of the radius-2 ball is sites 1..7, so ||c||_1 = 2^7 for f = x4
    pad = float(plain["residual"]) * 2 ** 7
    assert float(strict["p_min"]) == pytest.approx(float(plain["p_min"]) - pad, abs=1e-15)
    assert float(strict["p_max"]) == pytest.approx(float(plain["p_max"]) + pad, abs=1e-15)


def test_sweep_csv_and_slope(tmp_path):
    m, o = chain_files(tmp_path, 12, 0.3, [5, 6])
    out_csv = tmp_path / "sweep.csv"
    code, out = run(["sweep", "--model", m, "--observable", o, "--rmin", "1", "--rmax", "4",
                     "--out", str(out_csv)])
    assert code == 0
    rows = list(csv.DictReader(out_csv.open()))
    assert len(rows) == 8
    dlr_w = [float(r["width"]) for r in rows if r["hierarchy"] == "dlr"]
    assert all(b <= a + 1e-12 for a, b in zip(dlr_w, dlr_w[1:]))
    assert [int(r["dist"]) for r in rows if r["hierarchy"] == "dlr"] == [2, 3, 4, 5]
    slopes = [float(line.split("= ")[1].split()[0]) for line in out.splitlines() if "fitted slope" in line]
    assert len(slopes) == 2 and all(s < 0 for s in slopes)


def test_sweep_zero_beta(tmp_path):
    m, o = chain_files(tmp_path, 10, 0.0, [4])
    code, out = run(["sweep", "--model", m, "--observable", o, "--rmin", "0", "--rmax", "3"])
    assert code == 0
    assert all(abs(float(r["width"])) <= 1e-9 for r in csv_rows(out))


def test_sweep_records_failures(tmp_path):
    m, o = chain_files(tmp_path, 40, 0.3, [20])
    code, out = run(["sweep", "--model", m, "--observable", o, "--rmin", "6", "--rmax", "8",
                     "--hierarchy", "mc"])
    assert code == 0
    rows = csv_rows(out)
    assert rows[0]["p_min"] != "nan"
    assert rows[-1]["p_min"] == "nan" and rows[-1]["lambda_size"] == "17"
    assert "failed: GuardError" in out


def test_parallel_sweep_same_rows(tmp_path):
    m, o = chain_files(tmp_path, 12, 0.4, [6])
    args = ["sweep", "--model", m, "--observable", o, "--rmin", "0", "--rmax", "2"]
    seq = csv_rows(run(args)[1])
    par = csv_rows(run(args + ["--parallel"])[1])
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_ms"} for r in rows]
    assert strip(seq) == strip(par)


def test_exact_single_edge(tmp_path):
    m, o = chain_files(tmp_path, 2, 0.5, [0, 1])
    code, out = run(["exact", "--model", m, "--observable", o])
    assert code == 0
    value = float(next(line for line in out.splitlines() if "exact mu(f)" in line).split("=")[1])
    assert value == pytest.approx(math.tanh(0.5), abs=1e-14)


def test_exact_implicit_lattice(tmp_path, capsys):
    m = write(tmp_path, "m.json", {"lattice": {"type": "infinite_chain"},
                                   "model": {"type": "ising_ferro", "beta": 0.5}})
    o = write(tmp_path, "o.json", {"type": "spin_product", "sites": [0]})
    code, _ = run(["exact", "--model", m, "--observable", o])
    assert code == 2
    assert "implicit" in capsys.readouterr().err.lower()


def test_mc_on_implicit_lattice(tmp_path):
    m = write(tmp_path, "m.json", {"lattice": {"type": "infinite_chain"},
                                   "model": {"type": "ising_ferro", "beta": 0.5}})
    o = write(tmp_path, "o.json", {"type": "spin_product", "sites": [0]})
    assert run(["bound", "--model", m, "--observable", o, "--hierarchy", "mc"])[0] == 2
    assert run(["bound", "--model", m, "--observable", o, "--hierarchy", "dlr"])[0] == 0


def test_sample_deterministic(tmp_path):
    m, o = chain_files(tmp_path, 6, 0.5, [2, 3])
    args = ["sample", "--model", m, "--observable", o, "--samples", "5000", "--seed", "17"]
    a, b = run(args), run(args)
    assert a[0] == 0 and a == b
    c = run(args[:-1] + ["18"])
    assert c[1] != a[1]


def test_malformed_json(tmp_path, capsys):
    m = write(tmp_path, "m.json", '{"lattice": {"type": "chain", "n": 4},\n "model": }')
    o = write(tmp_path, "o.json", {"type": "spin_product", "sites": [0]})
    assert run(["exact", "--model", m, "--observable", o])[0] == 1
    assert "line 2, column" in capsys.readouterr().err


def test_usage_error_exit_1(tmp_path):
    assert run(["bound"])[0] == 1
    assert run(["frobnicate"])[0] == 1


def test_guard_exit_2(tmp_path):
    m, o = chain_files(tmp_path, 40, 0.3, [20])
    assert run(["bound", "--model", m, "--observable", o, "--radius", "8", "--hierarchy", "mc"])[0] == 2


def test_solver_failure_maps_to_3():
    from gibbs_certify.errors import IterationLimitError, SolverError
    assert cli.exit_code(SolverError("x")) == 3
    assert cli.exit_code(IterationLimitError("x")) == 3


def test_console_script(tmp_path):
    m, o = chain_files(tmp_path, 2, 0.5, [0, 1])
    res = subprocess.run([sys.executable, "-m", "gibbs_certify.cli", "exact", "--model", m, "--observable", o],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "exact mu(f)" in res.stdout


def test_fit_log_slope():
    rows = [cli.Row(r, r + 1, 0, 0, "dlr", 0, 0, math.exp(-2 * (r + 1)), 0, 0) for r in range(4)]
    assert cli.fit_log_slope(rows, "dlr") == pytest.approx(-2.0)
    assert math.isnan(cli.fit_log_slope(rows[:1], "dlr"))
