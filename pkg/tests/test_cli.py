import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from otpalm import cli, instance_io, socp
from otpalm.model import validate


def _gen(tmp_path, *extra, name="inst.json"):
    path = str(tmp_path / name)
    assert cli.main(["gen", *extra, "-o", path]) == 0
    return path


def test_gen_classical_validates(tmp_path, capsys):
    path = _gen(tmp_path, "--family", "classical", "--m", "10", "--n", "12", "--seed", "7")
    info = json.loads(capsys.readouterr().out)
    pd = instance_io.read_instance(path)
    assert validate(pd) == [] and (pd.m, pd.n) == (10, 12)
    assert info["id"] == instance_io.digest(pd) and info["seed"] == 7


def test_gen_groupda_group_count(tmp_path):
    path = _gen(tmp_path, "--family", "groupda", "--m", "200", "--n", "200", "--m1", "100",
                "--lambda1", "1", "--lambda2", "1")
    assert instance_io.read_instance(path).reg.partition.n_groups == 400


def test_gen_martingale(tmp_path):
    path = _gen(tmp_path, "--family", "martingale", "--m", "8", "--n", "8", "--n-prime", "6")
    assert instance_io.read_instance(path).constraints.preset.value == "martingale"


def test_gen_missing_flag_exits_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["gen", "--family", "classical", "--n", "3", "-o", str(tmp_path / "x.json")])
    assert exc.value.code == 2


def test_solve_one_by_one(tmp_path, capsys):
    path = tmp_path / "one.json"
    path.write_text(json.dumps(dict(m=1, n=1, cost=[2.0], alpha=[1.0], beta=[1.0])))
    out_csv = tmp_path / "runs.csv"
    dump = tmp_path / "sol.json"
    assert cli.main(["solve", str(path), "--csv", str(out_csv), "--dump-solution", str(dump), "--ref-obj", "2"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["status"] == "Converged" and rec["eta"] < 1e-6 and rec["nobj"] < 1e-6
    rows = list(csv.DictReader(out_csv.open()))
    assert len(rows) == 1 and list(rows[0]) == cli.RunRecord.fields()
    assert np.allclose(json.loads(dump.read_text())["X"], [[1.0]], atol=1e-6)


def test_solve_policies_are_labelled(tmp_path, capsys):
    path = _gen(tmp_path, "--family", "classical", "--m", "5", "--n", "5")
    capsys.readouterr()
    cli.main(["solve", path, "--policy", "absA", "--eps0", "1", "--p", "1.1", "--no-correction"])
    rec = json.loads(capsys.readouterr().out)
    assert rec["policy"] == "absA(eps0=1,p=1.1)+nocorr" and rec["correction"] is False
    cli.main(["solve", path, "--ref-oracle"])
    rec = json.loads(capsys.readouterr().out)
    assert rec["nobj"] is not None and rec["nobj"] < 1e-5


def test_solve_strict_timeout_exits_3(tmp_path):
    path = _gen(tmp_path, "--family", "classical", "--m", "20", "--n", "20")
    assert cli.main(["solve", path, "--maxtime-sec", "1e-9", "--tol", "1e-14", "--no-warm-start", "--strict"]) == 3


def test_corrupted_instance_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["check", str(bad)]) == 2
    assert cli.main(["solve", str(tmp_path / "missing.json")]) == 2


def test_check_lp_and_regularized(tmp_path, capsys):
    lp = tmp_path / "lp.json"
    lp.write_text(json.dumps(dict(m=2, n=2, cost=[0, 1, 1, 0], alpha=[0.5, 0.5], beta=[0.5, 0.5])))
    assert cli.main(["check", str(lp)]) == 0
    assert capsys.readouterr().out.startswith("PASS lp_oracle")
    reg = _gen(tmp_path, "--family", "groupda", "--m", "3", "--n", "3", name="reg.json")
    capsys.readouterr()
    assert cli.main(["check", reg]) == 0
    assert capsys.readouterr().out.startswith("PASS reg_oracle")
    assert cli.main(["check", str(lp), "--abs-tol", "-1"]) == 1


def test_export_socp(tmp_path, capsys):
    one = tmp_path / "one.json"
    one.write_text(json.dumps(dict(m=1, n=1, cost=[2.0], alpha=[1.0], beta=[1.0], lambda1=1.0, lambda2=1.0)))
    out = tmp_path / "one.socp"
    assert cli.main(["export-socp", str(one), "-o", str(out)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["vars"] == 4 and info["cones"] == 2
    sp = socp.read_socp(out)
    assert [(k, len(i)) for k, i in sp.cones] == [("QR", 3), ("Q", 2)]
    lp = tmp_path / "lp.json"
    lp.write_text(json.dumps(dict(m=1, n=1, cost=[2.0], alpha=[1.0], beta=[1.0])))
    assert cli.main(["export-socp", str(lp), "-o", str(out), "--require-cones"]) == 4
    assert cli.main(["export-socp", str(lp), "-o", str(out)]) == 0
    assert socp.read_socp(out).cones == []


def test_bench_row_counts_and_order(tmp_path):
    path = _gen(tmp_path, "--family", "classical", "--m", "4", "--n", "4")
    buf = io.StringIO()
    out_csv = tmp_path / "bench.csv"
    rows = cli.run_bench([path], "rho", csv_path=str(out_csv), out=buf)
    assert len(rows) == 10 and [r["index"] for r in rows] == list(range(10))
    assert [r["rho"] for r in rows] == list(cli.RHO_SWEEP)
    assert len(list(csv.DictReader(io.StringIO(buf.getvalue())))) == 10
    header = out_csv.read_text().splitlines()[0].split(",")
    assert header == cli.BENCH_PREFIX + cli.RunRecord.fields()
    grid = cli.run_bench([path], "grid", out=None)
    assert len(grid) == 18 and {(r["p"], r["q"]) for r in grid} == {(p, q) for p in cli.GRID_PQ for q in cli.GRID_PQ}
    assert all(r["status"] == "Converged" for r in rows + grid)
    again = cli.run_bench([path], "rho", out=None)
    assert [(r["outer"], r["lin"]) for r in again] == [(r["outer"], r["lin"]) for r in rows]


def test_threads_env(monkeypatch):
    monkeypatch.setenv("OTPALM_THREADS", "3")
    assert cli.threads() == 3
    monkeypatch.setenv("OTPALM_THREADS", "junk")
    assert cli.threads() >= 1
    monkeypatch.delenv("OTPALM_THREADS")
    assert cli.threads() >= 1


def test_parallel_bench_keeps_order(tmp_path, monkeypatch):
    path = _gen(tmp_path, "--family", "classical", "--m", "3", "--n", "3")
    serial = cli.run_bench([path], "rho", out=None)
    monkeypatch.setenv("OTPALM_THREADS", "2")
    par = cli.run_bench([path], "rho", out=None)
    assert [(r["index"], r["outer"], r["lin"]) for r in par] == [(r["index"], r["outer"], r["lin"]) for r in serial]


def test_module_entry_point(tmp_path):
    out = tmp_path / "e.json"
    res = subprocess.run([sys.executable, "-m", "otpalm.cli", "gen", "--family", "classical", "--m", "2", "--n", "2",
                          "-o", str(out)], capture_output=True, text=True)
    assert res.returncode == 0 and out.exists()
