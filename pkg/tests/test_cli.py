import csv
import io
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from cqedquant import cli

NETLISTS = Path(__file__).resolve().parents[1] / "netlists"


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_quantize_lc(capsys):
    code, out, _ = run(["quantize", NETLISTS / "lc.json"], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["convention"] == "f=omega/2pi"
    assert abs(data["frequencies_hz"][0] / 5.0329212104487e9 - 1) < 1e-12


def test_quantize_line_junction(capsys):
    code, out, _ = run(["quantize", NETLISTS / "line_junction.json", "--modes", 200], capsys)
    assert code == 0
    data = json.loads(out)
    assert abs(data["max_coupling_mode"] - 81) <= 1
    assert len(data["couplings"]) == 200


def test_quantize_gyrator_lc(capsys):
    code, out, _ = run(["quantize", NETLISTS / "gyrator_lc.json"], capsys)
    data = json.loads(out)
    # R = sqrt(L / C2) with L = 3 nH and C2 = 2 pF, C1 = 1 pF
    assert code == 0
    assert abs(data["frequencies_hz"][0] * 2 * np.pi * np.sqrt(3e-9 * 1e-12) - 1) < 1e-12


def test_malformed_json_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"nodes": ["g", ')
    code, _, err = run(["quantize", bad], capsys)
    assert code == 2
    assert "line 1" in err


def test_singular_capacitance_exit_code(tmp_path, capsys):
    doc = {"nodes": ["g", "a", "b"], "ground": "g", "branches": [
        {"kind": "C", "from": "a", "to": "g", "params": {"C": 1e-12}},
        {"kind": "L", "from": "a", "to": "b", "params": {"L": 1e-9}},
        {"kind": "L", "from": "b", "to": "g", "params": {"L": 1e-9}}]}
    path = tmp_path / "sing.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(["quantize", path], capsys)
    assert code == 3 and "project" in err
    code, out, err = run(["quantize", path, "--project"], capsys)
    assert code == 0 and "frozen" in err
    assert len(json.loads(out)["frequencies_hz"]) == 1


def test_modes_table(tmp_path, capsys):
    target = tmp_path / "modes.csv"
    code, _, _ = run(["modes", NETLISTS / "line_junction.json", "-n", 100, "-o", target], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(target.read_text())))
    assert len(rows) == 100
    k = np.array([float(r["k_per_m"]) for r in rows])
    assert np.all(np.diff(k) > 0)


def test_spectrum_output(capsys):
    code, out, _ = run(["spectrum", NETLISTS / "line_junction.json", "--points", 50, "--format", "json"], capsys)
    assert code == 0
    data = json.loads(out)
    assert len(data["f_hz"]) == 50 and all(v >= 0 for v in data["J"])


def test_modes_needs_a_line(capsys):
    code, _, err = run(["modes", NETLISTS / "lc.json"], capsys)
    assert code == 2 and err


def test_rabi_converge_trend(capsys):
    code, out, _ = run(["rabi-converge", "--Cj", 0, "--M", "1..6"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["M"]) for r in rows] == [1, 2, 3, 4, 5, 6]
    d = np.abs(np.diff([float(r["f_hz"]) for r in rows]))
    assert max(d[-2:]) < min(d[:2])


def test_rabi_converge_bad_range(capsys):
    code, _, _ = run(["rabi-converge", "--M", "3..x"], capsys)
    assert code == 2


def test_rabi_converge_parallel_is_identical(monkeypatch, capsys):
    _, serial, _ = run(["rabi-converge", "--M", "1,2,3"], capsys)
    monkeypatch.setenv("CQED_THREADS", "2")
    _, parallel, _ = run(["rabi-converge", "--M", "1,2,3"], capsys)
    assert serial == parallel


def test_selfcheck_passes(capsys):
    code, out, _ = run(["selfcheck"], capsys)
    assert code == 0
    assert "FAIL" not in out


@pytest.mark.parametrize("argv", [
    ["quantize", NETLISTS / "lc.json"],
    ["quantize", NETLISTS / "line_junction.json", "--format", "csv"],
    ["modes", NETLISTS / "line_junction.json", "-n", 30, "--format", "json"],
])
def test_outputs_are_byte_identical(argv, capsys):
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    assert a == b and a


@pytest.mark.skipif(shutil.which("cqedquant") is None, reason="console script not installed")
def test_console_script_exit_code():
    proc = subprocess.run(["cqedquant", "quantize", str(NETLISTS / "lc.json")], capture_output=True, text=True)
    assert proc.returncode == 0
    proc = subprocess.run([sys.executable, "-m", "cqedquant.cli", "quantize", "/nonexistent.json"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
