import csv
import io
import subprocess
import sys

import pytest

from ho3b.cli import EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, fmt, main
from ho3b.moshinsky import TABLE1

TOY = """
name: toy
kinematics: nonrelativistic
reference_mass: 0.33
particles:
  u: {mass: 0.33, spin: 0.5, isospin: 0.5}
  s: {mass: 0.55, spin: 0.5, isospin: 0.0}
structures:
  - {form: coulomb, strength: -0.25}
  - {form: linear, strength: 0.1}
"""


@pytest.fixture
def files(tmp_path):
    (tmp_path / "toy.yaml").write_text(TOY)
    (tmp_path / "run.yaml").write_text("particles: [u, u, u]\nnq_opt: 2\nnq_list: [2, 4]\nlevels: 2\n")
    return tmp_path


def _csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_fmt():
    assert fmt(3) == "3"
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(float("nan")) == "nan"


def test_bmc_census(capsys):
    assert main(["bmc-census", "--nq", "8"]) == EXIT_OK
    rows = _csv(capsys.readouterr().out)
    assert [int(r["computed"]) for r in rows] == list(TABLE1[:9])
    assert all(r["status"] == "pass" for r in rows)
    assert main(["bmc-census", "--nq", "17"]) == EXIT_INVALID


def test_solve_writes_csv(files):
    out = files / "out.csv"
    code = main(["solve", "--model", str(files / "toy.yaml"), "--run", str(files / "run.yaml"),
                 "--out", str(out)])
    assert code == EXIT_OK
    text = out.read_bytes()
    assert b"\r" not in text
    rows = _csv(text.decode())
    assert [r["N_Q"] for r in rows] == ["2", "4"]
    assert list(rows[0]) == ["N_Q", "D_Q", "b_x", "b_y", "E_1", "E_2"]
    assert float(rows[1]["E_1"]) <= float(rows[0]["E_1"])
    # same sizes at every cutoff
    assert rows[0]["b_x"] == rows[1]["b_x"]


def test_output_is_byte_identical(files, tmp_path):
    args = ["solve", "--model", str(files / "toy.yaml"), "--run", str(files / "run.yaml"), "--threads", "1"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b.csv")]) == EXIT_OK
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_scan_and_cache(files, capsys):
    (files / "scan.yaml").write_text("particles: [u, s, s]\nnq_opt: 4\nnq: 4\ngrid: [[1.5, 2.0], [2.0, 2.5]]\n")
    cache = files / "cache"
    args = ["scan", "--model", str(files / "toy.yaml"), "--run", str(files / "scan.yaml"), "--cache-dir", str(cache)]
    assert main(args) == EXIT_OK
    first = capsys.readouterr().out
    assert any(cache.iterdir())
    assert main(args) == EXIT_OK
    assert capsys.readouterr().out == first
    assert len(_csv(first)) == 2


def test_table7_and_regge_small(files, capsys):
    (files / "t7.yaml").write_text("nq_opt: 2\nnq: 4\n")
    ref = files / "ref.csv"
    ref.write_text("# toy reference\nname,particles,spin,isospin,level,exp,fit\n"
                   "D,u u u,1.5,1.5,0,1.2,1\nD2,u u u,1.5,1.5,1,1.7,0\nO,s s s,1.5,0,0,1.6,0\n")
    args = ["table7", "--model", str(files / "toy.yaml"), "--run", str(files / "t7.yaml"), "--reference", str(ref)]
    assert main(args) == EXIT_OK
    rows = _csv(capsys.readouterr().out)
    assert float(rows[0]["mass"]) == pytest.approx(1.2, abs=1e-12)
    assert [r["name"] for r in rows][-2:] == ["A/(m1m2m3)", "chi2"]
    (files / "rg.yaml").write_text("spin: 1.5\nisospin: 1.5\nL_values: [0, 2]\nnq_opt: 2\nnq: 4\n")
    assert main(["regge", "--model", str(files / "toy.yaml"), "--run", str(files / "rg.yaml")]) == EXIT_OK
    rows = _csv(capsys.readouterr().out)
    assert [r["L"] for r in rows] == ["0", "2"]
    assert float(rows[0]["M_renormalized"]) == pytest.approx(1.232)


def test_invalid_inputs_exit_2(files, capsys):
    bad = files / "bad.yaml"
    bad.write_text(TOY + "bogus: 1\n")
    assert main(["solve", "--model", str(bad), "--run", str(files / "run.yaml")]) == EXIT_INVALID
    assert "bogus" in capsys.readouterr().err
    assert main(["solve", "--model", str(files / "missing.yaml"), "--run", str(files / "run.yaml")]) == EXIT_INVALID
    (files / "r2.yaml").write_text("particles: [u, u, x]\n")
    assert main(["solve", "--model", str(files / "toy.yaml"), "--run", str(files / "r2.yaml")]) == EXIT_INVALID
    assert main(["solve", "--model", str(files / "toy.yaml")]) == EXIT_INVALID
    assert main(["solve", "--model", str(files / "toy.yaml"), "--run", str(files / "run.yaml"),
                 "--threads", "0"]) == EXIT_INVALID


def test_numerical_failure_exit_3(files):
    (files / "t7.yaml").write_text("nq_opt: 0\nnq: 0\n")
    ref = files / "ref.csv"
    ref.write_text("name,particles,spin,isospin,level,exp,fit\nD,u u u,1.5,1.5,3,1.2,1\n")
    args = ["table7", "--model", str(files / "toy.yaml"), "--run", str(files / "t7.yaml"), "--reference", str(ref)]
    assert main(args) == EXIT_NUMERIC


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "ho3b.cli", "bmc-census", "--nq", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[-1] == "2,24,24,pass"
