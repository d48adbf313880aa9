import json
import shutil
import subprocess
import sys

import pytest

from sparset1.cli import main


def _run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_zero_kernel_passes(capsys):
    code, out, _ = _run(["verify", "--kernel", "zero", "--level", "6", "--trials", "3", "--seed", "1"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["kind"] == "verify" and report["passed"]
    assert all(t["ratio"] == 0 for t in report["trials"])
    assert report["config_hash"] and report["version"]


def test_same_seed_gives_identical_bytes(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["verify", "--level", "7", "--trials", "4", "--seed", "5"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0

    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.csv").exists() and (tmp_path / "a.gp").exists()


def test_config_errors_exit_2(capsys):
    assert _run(["verify", "--trials", "0"], capsys)[0] == 2
    assert _run(["verify", "--kernel", "nonsense"], capsys)[0] == 2
    assert _run(["verify", "--gamma", "1.5"], capsys)[0] == 2
    assert _run(["frobnicate"], capsys)[0] == 2


def test_csv_output(capsys):
    code, out, _ = _run(["grid-mc", "--samples", "40", "--r-sweep", "4,6", "--format", "csv", "--seed", "2"], capsys)
    lines = out.strip().splitlines()
    assert "bad_frequency" in lines[0] and len(lines) == 3
    assert code in (0, 1)


def test_zero_shift_is_always_bad(capsys):
    code, out, _ = _run(["grid-mc", "--samples", "20", "--r-sweep", "4,6", "--zero-shift"], capsys)
    report = json.loads(out)
    assert all(row["bad_frequency"] == 1.0 for row in report["rows"])


def test_report_aggregates_directory(tmp_path, capsys):
    assert main(["verify", "--kernel", "zero", "--level", "6", "--trials", "2", "--out",
                 str(tmp_path / "v.json")]) == 0
    code, out, _ = _run(["report", str(tmp_path)], capsys)
    assert code == 0
    lines = json.loads(out)["lines"]
    assert lines == [{"report": "v.json", "check": "verify", "passed": True}]


def test_entry_point_runs():
    exe = shutil.which("t1")
    cmd = [exe] if exe else [sys.executable, "-m", "sparset1.cli"]
    res = subprocess.run(cmd + ["verify", "--kernel", "zero", "--level", "5", "--trials", "1"],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0, res.stderr
    assert json.loads(res.stdout)["passed"]
