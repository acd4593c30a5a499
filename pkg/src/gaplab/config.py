"""Run configuration: flat key=value files plus command-line overrides."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class Config:
    """Numerical knobs shared across modules.

    C1, C2 are the resonance and coupling multipliers (eps0 = C1 * beta,
    regime |lam| < exp(-C2 * beta)). ``eps0_floor`` keeps eps0 positive for
    frequencies whose finite-sample beta is essentially zero.
    """

    C1: float = 40.0
    C2: float = 400.0
    eps0_floor: float = 0.05
    C0: float = 3.0
    guard_bits: int = 32
    residual_tol: float = 1e-10
    boundary_mass: float = 1e-8
    divisor_floor: float = 1e-14
    det_tol: float = 1e-8
    seed: int = 0
    threads: int = 0

    def eps0(self, beta_hat):
        return max(self.C1 * float(beta_hat), self.eps0_floor)

    def in_regime(self, lam, beta_hat):
        return abs(lam) < math.exp(-self.C2 * float(beta_hat))

    def to_json(self):
        return asdict(self)


DEFAULT = Config()


def _coerce(name, text):
    kind = {f.name: f.type for f in fields(Config)}[name]
    if kind in ("int", int):
        return int(text)
    return float(text)


def parse_config_text(text, base=DEFAULT):
    """Parse 'key = value' lines; '#' starts a comment."""
    known = {f.name for f in fields(Config)}
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        updates[key] = _coerce(key, val)
    return replace(base, **updates)


def load_config(path=None, overrides=None, base=DEFAULT):
    """File values over defaults, then ``overrides`` (flags win)."""
    cfg = base
    if path:
        with open(path, encoding="utf-8") as fh:
            cfg = parse_config_text(fh.read(), cfg)
    if overrides:
        cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    return cfg
