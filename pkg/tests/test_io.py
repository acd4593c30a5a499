import json

import numpy as np

from gaplab.io import RunManifest, csv_text, dumps, fmt_float, sha256_file


def test_seventeen_digits_roundtrip():
    rng = np.random.default_rng(0)
    for x in rng.normal(size=100) * 10.0 ** rng.integers(-20, 20, size=100):
        assert float(fmt_float(x)) == x


def test_dumps_is_valid_json_and_exact():
    obj = {"a": 0.1, "b": [1, 2.5, np.float64(1 / 3)], "c": np.array([0.2, 0.3])}
    back = json.loads(dumps(obj))
    assert back["b"][2] == 1 / 3
    assert back["c"] == [0.2, 0.3]


def test_csv_has_header():
    text = csv_text(["E", "L"], [(0.1, 0.2)])
    lines = text.splitlines()
    assert lines[0] == "E,L"
    assert float(lines[1].split(",")[0]) == 0.1


def test_manifest_digest(tmp_path):
    p = tmp_path / "out.json"
    p.write_text("{}")
    m = RunManifest(["gaplab", "x"], {"seed": 0})
    m.add_output(p)
    m.finish().write(tmp_path / "m.json")
    data = json.loads((tmp_path / "m.json").read_text())
    assert data["outputs"][str(p)] == sha256_file(p)
    assert data["version"]
