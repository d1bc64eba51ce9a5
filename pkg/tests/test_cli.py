import csv
import json
import subprocess
import sys

import pytest

from ufgkit.cli.main import EXIT_ERROR, EXIT_FAIL, EXIT_OK, main

FAST = ["--paths", "2000", "--dt", "0.01"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_ufg_grusin(capsys):
    code, out, _ = run(capsys, "check-ufg", "--model", "grusin")
    assert code == EXIT_OK
    rep = json.loads(out)
    assert rep["verdict"] == "PASS"
    assert rep["ufg"]["status"] == "verified"
    assert rep["dilation"]["lambda0"] == 1.0


def test_check_ufg_needs_order_four(capsys):
    code, _, _ = run(capsys, "check-ufg", "--model", "example22-first", "--m", "1")
    assert code == EXIT_FAIL
    code, out, _ = run(capsys, "check-ufg", "--model", "example22-first")
    assert code == EXIT_OK and json.loads(out)["ufg"]["ansatz"]


def test_rate_exit_codes(capsys):
    code, out, _ = run(capsys, "rate", "--model", "heisenberg")
    assert code == EXIT_OK
    assert json.loads(out)["rate"]["certified_lambda"] >= 0.99
    for name in ("ou-positive", "example22"):
        assert run(capsys, "rate", "--model", name)[0] == EXIT_FAIL


def test_decay_without_rate_fails(capsys):
    code, out, _ = run(capsys, "decay", "--model", "ou-positive", *FAST)
    assert code == EXIT_FAIL


def test_errors_exit_one(capsys, tmp_path):
    bad = tmp_path / "bad.model"
    bad.write_text("[model]\ndim = 1\nnoises = 1\n[fields]\nV0 = z\nV1 = 1\n")
    code, out, err = run(capsys, "check-ufg", "--model", str(bad))
    assert code == EXIT_ERROR
    assert json.loads(out)["error"]["module"] == "cli"
    assert "line 5" in err
    assert run(capsys, "rate", "--model", str(tmp_path / "missing.model"))[0] == EXIT_ERROR


def test_reports_are_reproducible(capsys):
    args = ["decay", "--model", "grusin", *FAST, "--t-grid", "1,2,0.25", "--seed", "3"]
    code1, out1, _ = run(capsys, *args)
    code2, out2, _ = run(capsys, *args)
    assert out1 == out2 and code1 == code2
    assert code1 in (EXIT_OK, EXIT_FAIL)
    rep = json.loads(out1)
    assert rep["decay"]["threshold"] == pytest.approx(1.6)
    assert "fitted_exponent" in rep["decay"]["directions"]["1"]


def test_out_directory(capsys, tmp_path):
    code, out, _ = run(capsys, "decay", "--model", "grusin", *FAST, "--t-grid", "1,2,0.25",
                       "--out", str(tmp_path))
    assert code in (EXIT_OK, EXIT_FAIL)
    assert (tmp_path / "report.json").exists()
    csvs = sorted(tmp_path.glob("decay_*.csv"))
    assert csvs
    with open(csvs[0]) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "value", "stderr"] and len(rows) == 6
    assert "verdict:" in out


def test_console_script_module():
    proc = subprocess.run([sys.executable, "-m", "ufgkit.cli.main", "check-ufg", "--model", "grusin"],
                          capture_output=True, text=True)
    assert proc.returncode == 0


def test_bad_command_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["explode", "--model", "grusin"])
    assert info.value.code == 2
