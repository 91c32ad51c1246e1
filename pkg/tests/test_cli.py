import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from quasisl import cli
from quasisl.errors import WindowTooCoarse

PROBLEMS = Path(__file__).resolve().parents[1] / "demos" / "problems"
FREE_PI = str(PROBLEMS / "free_0_pi.json")
FREE_01 = str(PROBLEMS / "free_0_1.json")
DELTA = str(PROBLEMS / "delta_step.json")


def run_csv(argv, tmp_path):
    out = tmp_path / "out.csv"
    assert cli.run(argv + ["-o", str(out)]) == 0
    return list(csv.DictReader(io.StringIO(out.read_text())))


def run_json(argv, tmp_path):
    out = tmp_path / "out.json"
    assert cli.run(argv + ["-o", str(out)]) == 0
    return json.loads(out.read_text())


def test_eigs_example(tmp_path):
    rows = run_csv(["eigs", FREE_PI, "--bc", "dirichlet", "--count", "5"], tmp_path)
    assert [int(r["index"]) for r in rows] == list(range(5))
    lams = [float(r["lambda"]) for r in rows]
    assert np.allclose(lams, [1, 4, 9, 16, 25], rtol=1e-8)
    assert all(float(r["bc_residual"]) <= 1e-8 for r in rows)
    assert list(rows[0]) == cli.SCHEMAS["eigs"]["columns"]


def test_eigs_periodic_multiplicity(tmp_path):
    rows = run_csv(["eigs", FREE_01, "--bc", "periodic", "--count", "5"], tmp_path)
    assert [int(r["multiplicity"]) for r in rows] == [1, 2, 2]
    assert [int(r["index"]) for r in rows] == [0, 1, 2]


def test_krein_example(tmp_path):
    out = run_json(["krein", FREE_01], tmp_path)
    assert np.allclose(out["R_K"], [[1, 1], [0, 1]], atol=1e-8)
    assert abs(out["det"] - 1.0) <= 1e-9
    assert out["kernel_dim"] == 2


def test_classify_example(tmp_path):
    out = run_json(["classify", FREE_01, "--endpoint", "b"], tmp_path)
    assert out["class"] == "Regular"


def test_classify_half_line(tmp_path):
    out = run_json(["classify", str(PROBLEMS / "halfline_truncated.json"), "--endpoint", "b"], tmp_path)
    assert out["class"] == "LimitPoint"


def test_green_grid(tmp_path):
    rows = run_csv(["green", FREE_01, "--bc", "dirichlet", "--z", "0", "--grid", "5"], tmp_path)
    assert len(rows) == 25
    for r in rows:
        x, y = float(r["x"]), float(r["y"])
        assert abs(float(r["re_G"]) - min(x, y) * (1 - max(x, y))) <= 1e-9


def test_mfunc(tmp_path):
    rows = run_csv(["mfunc", FREE_01, "--bc", "dirichlet", "--re", "-1", "-1", "1", "--im", "0"], tmp_path)
    assert float(rows[0]["re_m"]) == pytest.approx(-1 / math.tanh(1), abs=1e-8)


def test_measure(tmp_path):
    rows = run_csv(["measure", FREE_PI, "--bc", "dirichlet", "--count", "2"], tmp_path)
    assert float(rows[0]["weight"]) == pytest.approx(2 / math.pi, rel=1e-8)
    assert float(rows[1]["weight"]) == pytest.approx(8 / math.pi, rel=1e-8)


def test_mmatrix(tmp_path):
    rows = run_csv(["mmatrix", FREE_PI, "--bc", "dirichlet", "--lam", "1", "4"], tmp_path)
    assert [r["class"] for r in rows] == ["one", "one"]
    assert all(float(r["detR"]) <= 1e-3 for r in rows)


def test_positivity(tmp_path):
    out = run_json(["positivity", FREE_01, "--bc", "antiperiodic", "--lam", "-1"], tmp_path)
    assert out["classification"] == "NotPreserving" and out["agree"] and out["min"] < 0
    out = run_json(["positivity", FREE_01, "--krein", "--lam", "-1"], tmp_path)
    assert out["classification"] == "NotPreserving" and out["agree"]


def test_ordering(tmp_path):
    rows = run_csv(["ordering", FREE_01], tmp_path)
    assert len(rows) == 6 and all(r["ok"] == "true" for r in rows)


def test_solve_ivp(tmp_path):
    rows = run_csv(["solve-ivp", FREE_PI, "--z", "1", "--u", "0", "--u1", "1", "--grid", "5"], tmp_path)
    for r in rows:
        assert abs(float(r["re_u"]) - math.sin(float(r["x"]))) <= 1e-10


def test_principal(tmp_path):
    out = run_json(["principal", FREE_01, "--lam", "0", "--x0", "0"], tmp_path)
    xs = np.array(out["samples"]["x"])
    assert np.max(np.abs(np.array(out["samples"]["u0"]) - (1 - xs))) <= 1e-9
    assert np.max(np.abs(np.array(out["samples"]["u1"]) - xs)) <= 1e-9


def test_csv_format(tmp_path):
    out = tmp_path / "e.csv"
    cli.run(["eigs", FREE_PI, "--count", "2", "-o", str(out)])
    raw = out.read_bytes()
    assert b"\r" not in raw
    lam = raw.decode().splitlines()[2].split(",")[1]
    assert float(lam) == pytest.approx(4.0) and len(lam.replace(".", "").lstrip("0")) >= 15


# determinism and schemas ---------------------------------------------------

@pytest.mark.parametrize("argv", [["eigs", DELTA, "--count", "6"], ["krein", FREE_01],
                                  ["green", DELTA, "--bc", "periodic", "--z", "-1", "--grid", "7"]],
                         ids=["eigs", "krein", "green"])
def test_deterministic(tmp_path, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.run(argv + ["-o", str(a)]) == 0
    assert cli.run(argv + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("name", sorted(cli.SCHEMAS))
def test_json_schema_flag(tmp_path, name):
    out = tmp_path / "s.json"
    assert cli.run([name, "--json-schema", "-o", str(out)]) == 0
    assert json.loads(out.read_text()) == json.loads(json.dumps(cli.SCHEMAS[name]))


def test_every_subcommand_has_schema():
    assert set(cli.SCHEMAS) == set(cli.COMMANDS)


# exit codes ----------------------------------------------------------------

def test_usage_errors(capsys):
    assert cli.run([]) == 64
    assert cli.run(["nope"]) == 64
    assert cli.run(["eigs"]) == 64
    assert cli.run(["eigs", FREE_PI, "--count", "x"]) == 64
    line = capsys.readouterr().err.strip().splitlines()[-1]
    assert json.loads(line)["level"] == "error"


def test_precondition_errors(tmp_path):
    assert cli.run(["eigs", str(tmp_path / "missing.json")]) == 1
    assert cli.run(["eigs", FREE_PI, "--window", "5", "1"]) == 1
    assert cli.run(["solve-ivp", FREE_PI, "--rtol", "-1"]) == 1
    assert cli.run(["green", FREE_PI, "--bc", "dirichlet", "--z", "4"]) == 1
    bad = tmp_path / "neg.json"
    bad.write_text(json.dumps({"interval": [0, 1], "coefficients": {"q": "-20"}}))
    assert cli.run(["krein", str(bad)]) == 1


def test_numerical_error_exit_code(monkeypatch):
    def boom(P, o):
        raise WindowTooCoarse("synthetic")
    monkeypatch.setitem(cli.COMMANDS, "eigs", (boom, "x"))
    assert cli.run(["eigs", FREE_PI]) == 2


def test_diagnostics_are_json_lines(capsys):
    cli.run(["krein", FREE_01])
    captured = capsys.readouterr()
    events = [json.loads(line)["event"] for line in captured.err.strip().splitlines()]
    assert events == ["start", "done"]
    assert json.loads(captured.out)["kernel_dim"] == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "quasisl", "eigs", FREE_PI, "--count", "3"],
                         capture_output=True, text=True, timeout=300)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == "index,lambda,multiplicity,bc_residual,l2_norm_check"
