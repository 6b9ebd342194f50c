import json

import jsonschema
import numpy as np
import pytest

from curvkit import fieldio, sim
from curvkit.cli import load_schema, main
from curvkit.domain import make_domain
from curvkit.field import Field


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def _report(capsys, *argv):
    code, out = _run(capsys, *argv)
    return code, json.loads(out)


def test_identities_report(capsys):
    code, rep = _report(capsys, "identities", "--trials", "20")
    assert code == 0
    jsonschema.validate(rep, load_schema())
    assert rep["example"] == "identities"
    assert all(r["max"] <= 1e-12 for r in rep["residuals"].values())


@pytest.mark.parametrize("example", ["toda", "sg"])
def test_reports_are_reproducible(capsys, example):
    argv = ["verify", example, "--seed", "3"]
    argv += ["--size", "16x16"] if example == "toda" else ["--steps", "100", "--sites", "8"]
    texts = []
    for _ in range(2):
        code, out = _run(capsys, *argv)
        assert code == 0
        wall = json.loads(out)["wall_time"]
        texts.append(out.replace(f'"wall_time": {wall}', ""))
    assert texts[0] == texts[1]


def test_report_written_to_file(tmp_path, capsys):
    path = tmp_path / "r.json"
    assert main(["verify", "toda", "--size", "8x8", "--out", str(path)]) == 0
    assert capsys.readouterr().out == ""
    jsonschema.validate(json.loads(path.read_text()), load_schema())


@pytest.mark.parametrize(
    "argv,code",
    [
        (["verify", "toda", "--size", "32x32", "--lambda", "2"], 0),
        (["verify", "sg", "--gamma", "1", "--k", "2", "--steps", "200", "--sites", "16"], 0),
        (["verify", "nls", "--no-solver", "--spacings", "0.1,0.05"], 0),
        (["verify", "nls", "--as-printed", "--no-solver", "--spacings", "0.1,0.05"], 1),
        (["verify", "sg", "--steps", "200", "--sites", "16", "--coefficients", "1,2"], 1),
    ],
)
def test_verify_exit_codes(capsys, argv, code):
    got, rep = _report(capsys, *argv)
    assert got == code
    assert rep["pass"] is (code == 0)
    jsonschema.validate(rep, load_schema())


def test_sg_report_scans(capsys):
    _, rep = _report(capsys, "verify", "sg", "--steps", "200", "--sites", "16")
    assert {s["name"] for s in rep["scan"]} == {"k", "coefficient"}
    flat = [s["param"] for s in rep["scan"] if s["name"] == "coefficient" and s["residual"] <= 1e-7]
    assert flat == [4.0]


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "foo"],
        ["identities", "--sizes", ","],
        ["identities", "--sizes", "1"],
        ["verify", "toda", "--size", "64by64"],
        ["verify", "sg", "--k", "0"],
        ["verify", "toda", "--lambda", "0"],
        ["simulate", "sg", "--steps", "0", "--out", "x.cvf"],
        ["verify", "toda", "--field", "/nonexistent/field.cvf"],
        ["dump", "/nonexistent/field.cvf", "--csv", "out.csv"],
    ],
)
def test_config_errors_exit_2(tmp_path, monkeypatch, capsys, argv):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2


def test_numerical_failure_exit_3(tmp_path, capsys):
    code = main(["simulate", "sg", "--coefficient", "1e12", "--dt", "0.1", "--out", str(tmp_path / "s.cvf")])
    assert code == 3
    assert "step 1" in capsys.readouterr().err
    assert not (tmp_path / "s.cvf").exists()


def test_toda_overflow_field_exit_3(tmp_path, capsys):
    dom = make_domain(2, 0, [(0, 5), (0, 5)], names=["m", "n"])
    q = np.zeros((6, 6))
    q[3, 3] = 800.0
    path = fieldio.write_field(Field.from_samples(dom, q), tmp_path / "q.cvf")
    assert main(["verify", "toda", "--field", str(path)]) == 3


def test_verify_supplied_field(tmp_path, capsys):
    q = sim.toda_evolve(*np.random.default_rng(0).normal(scale=0.2, size=(2, 12)), steps=10)
    path = fieldio.write_field(q, tmp_path / "q.cvf")
    code, rep = _report(capsys, "verify", "toda", "--field", str(path))
    assert code == 0
    assert [(a["min"], a["max"]) for a in rep["grid"]["lattice"]] == [(0, 11), (0, 11)]


def test_simulate_nls_writes_soliton(tmp_path, capsys):
    out = tmp_path / "u.cvf"
    code, _ = _run(capsys, "simulate", "nls", "--steps", "100", "--dt", "1e-2", "--h", "0.1", "--out", str(out))
    assert code == 0
    f = fieldio.read_field(out)
    cfg = sim.SolverConfig(dt=1e-2, steps=100, h=0.1)
    direct = sim.nls_solve(lambda x: sim.nls_soliton(x, 0.0), cfg)
    assert np.array_equal(f.values(), direct.values())


def test_simulate_toda_zero_rows(tmp_path, capsys):
    out, csv = tmp_path / "q.cvf", tmp_path / "q.csv"
    code, summary = _report(capsys, "simulate", "toda", "--rows", "zero", "--size", "8x8", "--out", str(out), "--csv", str(csv))
    assert code == 0
    assert summary["max_abs"] == 0
    assert fieldio.read_field(out).max_abs() == 0
    assert fieldio.read_csv(csv).max_abs() == 0


def test_dump_matches_field(tmp_path, capsys):
    out = tmp_path / "s.cvf"
    assert main(["simulate", "sg", "--steps", "10", "--sites", "6", "--out", str(out)]) == 0
    assert main(["dump", str(out), "--csv", str(tmp_path / "s.csv")]) == 0
    a, b = fieldio.read_field(out), fieldio.read_csv(tmp_path / "s.csv")
    assert np.array_equal(a.values(), b.values())


def test_verify_dump_writes_csv(tmp_path, capsys):
    code, _ = _run(capsys, "verify", "toda", "--size", "8x8", "--dump", str(tmp_path / "d"))
    assert code == 0
    residual = fieldio.read_csv(tmp_path / "d" / "residual.csv")
    assert residual.max_abs() <= 1e-10
    assert fieldio.read_csv(tmp_path / "d" / "field.csv").shape == ()
