"""JSON/CSV emission with 17 significant digits and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__


def fmt_float(x):
    """17 significant digits: exact round trip for doubles."""
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _plain(obj):
    """Convert numpy scalars/arrays, fractions and complex numbers to JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if hasattr(obj, "to_json"):
        return _plain(obj.to_json())
    return obj


def dumps(obj, indent=2):
    """JSON text with every float written to 17 significant digits."""
    return _encode(_plain(obj), indent, 0)


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, float):
        return fmt_float(obj)
    return json.dumps(obj)


def write_json(path, obj):
    text = dumps(obj) + "\n"
    Path(path).write_text(text, encoding="utf-8")
    return text


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def write_csv(path, header, rows):
    text = csv_text(header, rows)
    Path(path).write_text(text, encoding="utf-8")
    return text


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Everything needed to reproduce a run and check its outputs."""

    argv: list
    config: dict
    frequency: dict | None = None
    seeds: dict = field(default_factory=dict)
    version: str = __version__
    python: str = field(default_factory=lambda: sys.version.split()[0])
    platform: str = field(default_factory=platform.platform)
    started: float = field(default_factory=time.time)
    wall_time: float = 0.0
    outputs: dict = field(default_factory=dict)

    def add_output(self, path):
        self.outputs[str(path)] = sha256_file(path)

    def finish(self):
        self.wall_time = time.time() - self.started
        return self

    def to_json(self):
        return {"argv": self.argv, "config": self.config, "frequency": self.frequency,
                "seeds": self.seeds, "version": self.version, "python": self.python,
                "platform": self.platform, "wall_time": self.wall_time,
                "outputs": self.outputs}

    def write(self, path):
        return write_json(path, self.to_json())
