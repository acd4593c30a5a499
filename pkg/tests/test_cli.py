import json
import subprocess
import sys

import pytest

from gaplab.cli import parse_energies, run
from gaplab.io import sha256_file


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_freq_fibonacci(capsys):
    code, out, _ = call(capsys, "freq", "--digits", "1x30")
    assert code == 0
    obj = json.loads(out)
    qs = [c["q"] for c in obj["convergents"]]
    assert qs[:8] == [1, 1, 2, 3, 5, 8, 13, 21]
    # thirty partial quotients pin the value to about 1/q_30^2
    assert obj["value"] == pytest.approx((5 ** 0.5 - 1) / 2, abs=1e-11)


def test_spectrum_rational(capsys):
    code, out, _ = call(capsys, "spectrum", "--lambda", "0.5", "--alpha", "3/5")
    obj = json.loads(out)
    assert code == 0 and len(obj["bands"]) == 5 and len(obj["gaps"]) == 4


def test_csv_emission_and_manifest(tmp_path, capsys):
    path = tmp_path / "lyap.csv"
    code, _, _ = call(capsys, "lyap", "--lambda", "0.5", "--alpha", "golden:30",
                      "--E", "-1:1:5", "--n", "2000", "--emit", str(path))
    assert code == 0
    lines = path.read_text().splitlines()
    assert lines[0] == "E,L,L_max,L_min" and len(lines) == 6
    man = json.loads((tmp_path / "lyap.csv.manifest.json").read_text())
    assert man["outputs"][str(path)] == sha256_file(path)
    assert man["frequency"] is not None
    assert "version" in man and "seeds" in man


def test_thread_count_invariance(tmp_path, capsys, monkeypatch):
    outs = []
    for threads in ("1", "4"):
        path = tmp_path / f"rot{threads}.csv"
        code, _, _ = call(capsys, "rot", "--lambda", "0.3", "--alpha", "golden:30",
                          "--E", "-2:2:33", "--n", "4000", "--threads", threads,
                          "--emit", str(path))
        assert code == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_parse_energies():
    assert list(parse_energies("0.5")) == [0.5]
    assert list(parse_energies("-1:1:3")) == [-1.0, 0.0, 1.0]
    assert list(parse_energies("0.1,0.2")) == [0.1, 0.2]


def _sub(*argv):
    return subprocess.run([sys.executable, "-m", "gaplab", *argv],
                          capture_output=True, text=True, timeout=300)


def test_usage_errors_exit_2():
    assert _sub("spectrum", "--lambda", "0.5").returncode == 2
    assert _sub("freq").returncode == 2
    assert _sub("bogus").returncode == 2


def test_computation_error_exit_1():
    # a rational frequency cannot be reduced
    r = _sub("reduce", "--lambda", "0.05", "--alpha", "3/5", "--E", "0.3")
    assert r.returncode in (1, 2)
    assert r.stderr.startswith(("error", "usage error"))


def test_verify_quick(capsys):
    code = run(["verify", "--suite", "quick"])
    out = capsys.readouterr()
    assert code == 0
    # progress lines go to stderr while the JSON report owns stdout
    assert "5/5 criteria passed" in out.err
    assert json.loads(out.out)["passed"] == 5
