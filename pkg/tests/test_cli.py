import json
import os
import subprocess
import sys

import pytest

from ehbec.cli import EXIT_ARGS, EXIT_OK, EXIT_SOLVER, EXIT_VERIFY, main, parse_grid
from ehbec.periodic import capacity_fb_closed, capacity_ff, curve_from_csv


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_capacity_periodic(capsys):
    code, out, _ = run(capsys, "capacity", "periodic", "--alpha", "0.5")
    assert code == EXIT_OK
    d = json.loads(out)
    assert d["C_ff"] == pytest.approx(0.433897, abs=1e-5)
    assert d["C_fb"] == pytest.approx(0.442886, abs=1e-5)
    assert d["C_ff"] == float(f"{capacity_ff(0.5).value:.9g}")


def test_capacity_periodic_alpha1(capsys):
    code, out, _ = run(capsys, "capacity", "periodic", "--alpha", "1.0", "--format", "csv")
    assert code == EXIT_OK
    head, row = out.strip().splitlines()
    vals = dict(zip(head.split(","), row.split(",")))
    assert float(vals["C_ff"]) == 0.0 and float(vals["C_fb"]) == 0.0


def test_capacity_iid_reports_gap(capsys):
    code, out, _ = run(capsys, "capacity", "iid", "--alpha", "0.5", "--p", "0.5", "--tol", "1e-4")
    assert code == EXIT_OK
    d = json.loads(out)
    assert {"C", "C_fb", "N_used", "tail_bound"} <= set(d)
    assert d["C_fb"] - d["C"] > 0
    assert d["tail_bound"] <= 1e-4


def test_capacity_iid_partial_exits_3(capsys):
    code, out, err = run(capsys, "capacity", "iid", "--alpha", "0.5", "--p", "0.1", "--kmax", "3")
    assert code == EXIT_SOLVER
    assert json.loads(out)["partial"] is True
    assert "kmax" in err


@pytest.mark.parametrize("argv", [
    ["capacity", "periodic", "--alpha", "1.5"],
    ["capacity", "iid", "--alpha", "0.5"],
    ["capacity", "iid", "--p", "0", "--alpha", "0.5"],
    ["curve", "--grid", "0:0:1"],
    ["curve", "--grid", "bad"],
    ["epoch-rate", "--kmax", "0"],
    ["verify", "nothing"],
    ["frobnicate"],
])
def test_bad_arguments_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_ARGS
    assert err


def test_parse_grid():
    g = parse_grid("0:0.25:1")
    assert g == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_curve_default(capsys, tmp_path):
    path = tmp_path / "curve.csv"
    assert main(["curve", "--out", str(path)]) == EXIT_OK
    text = path.read_text()
    lines = text.strip().splitlines()
    assert lines[0] == "alpha,C_ff,C_fb"
    assert len(lines) == 102
    a, ff, fb = (float(v) for v in lines[51].split(","))
    assert a == 0.5
    assert ff == pytest.approx(0.433897, abs=1e-5) and fb == pytest.approx(0.442886, abs=1e-5)
    rows = curve_from_csv(text)
    assert all(r.c_fb >= r.c_ff for r in rows)
    assert abs(rows[0].c_fb - rows[0].c_ff) < 1e-9 and abs(rows[-1].c_fb - rows[-1].c_ff) < 1e-9
    # round trip at 9 significant digits
    for r in rows:
        assert r.c_ff == float(f"{capacity_ff(r.alpha).value:.9g}")
        assert r.c_fb == float(f"{capacity_fb_closed(r.alpha).value:.9g}")


def test_outputs_are_byte_identical(tmp_path):
    for argv in (["curve", "--grid", "0:0.1:1"], ["statechannel"], ["epoch-rate", "--kmax", "3"],
                 ["capacity", "periodic", "--alpha", "0.3"]):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(argv + ["--out", str(a)]) == EXIT_OK
        assert main(argv + ["--out", str(b)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()


def test_statechannel_table(capsys):
    code, out, _ = run(capsys, "statechannel", "--p", "0.5", "--alpha", "0.5")
    assert code == EXIT_OK
    head, row = out.strip().splitlines()
    assert head == "p,alpha,C,C_fb,gap"
    assert float(row.split(",")[4]) > 1e-4
    code, out, _ = run(capsys, "statechannel")
    assert len(out.strip().splitlines()) == 122


def test_epoch_rate(capsys):
    code, out, _ = run(capsys, "epoch-rate", "--alpha", "0.5", "--kmax", "3", "--format", "json")
    assert code == EXIT_OK
    rows = json.loads(out)
    assert [r["k"] for r in rows] == [1, 2, 3]
    for r in rows:
        assert r["rate_ff"] <= r["rate_fb"] + 1e-9 <= r["bound"] + 2e-9
    assert rows[1]["rate_fb"] / 2 == pytest.approx(0.442886, abs=1e-5)


def test_write_error_names_path(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    target = blocker / "sub" / "curve.csv"
    code, _, err = run(capsys, "curve", "--out", str(target))
    assert code == EXIT_ARGS
    assert str(target) in err


def test_atomic_write_leaves_no_temp_files(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["curve", "--grid", "0:0.5:1", "--out", str(out)]) == EXIT_OK
    assert os.listdir(tmp_path) == ["c.csv"]


def test_verify_oracle(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "oracle", "--alpha", "0.5", "--out", str(tmp_path))
    assert code == EXIT_OK
    assert out.count("PASS") == 4 and "FAIL" not in out
    rep = json.loads((tmp_path / "oracle.json").read_text())
    assert rep["passed"] is True


def test_verify_typicality_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    argv = ["verify", "typicality", "--p", "0.5", "--n", "1000000", "--seed", "7"]
    assert main(argv + ["--out", str(a)]) == EXIT_OK
    assert main(argv + ["--out", str(b)]) == EXIT_OK
    assert (a / "typicality.json").read_bytes() == (b / "typicality.json").read_bytes()


def test_verify_failure_exits_1_and_names_invariant(capsys, tmp_path):
    code, out, err = run(capsys, "verify", "typicality", "--n", "10000", "--epsilon", "1e-4",
                         "--out", str(tmp_path))
    assert code == EXIT_VERIFY
    assert "FAIL" in out
    assert "typicality: pi(" in err


def test_verify_all_default(tmp_path):
    # the full release gate, as a user runs it
    proc = subprocess.run([sys.executable, "-m", "ehbec", "verify", "all", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_OK, proc.stdout + proc.stderr
    names = sorted(os.listdir(tmp_path))
    assert names == ["channel_feedback.json", "channel_uniform.json", "oracle.json",
                     "typicality_frequency.json"]
