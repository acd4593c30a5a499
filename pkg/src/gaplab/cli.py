"""Command-line front end: ``gaplab <subcommand> [options]``.

Every subcommand prints JSON to stdout, or writes ``--emit PATH`` (CSV when
the path ends in ``.csv``) together with ``PATH.manifest.json``.
Exit codes: 0 success, 1 computation error (tagged with its stage),
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from . import __version__
from .config import load_config
from .frequency import (IrrationalFrequency, alpha_label, beta_estimate, build_frequency,
                        parse_alpha, parse_digits, resonances)
from .io import RunManifest, csv_text, dumps


class UsageError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage, exc):
        self.stage = stage
        super().__init__(str(exc))


# ----------------------------------------------------------------------------
# helpers

def thread_count(cfg):
    n = cfg.threads or os.cpu_count() or 1
    cap = os.environ.get("GAPLAB_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise UsageError(f"GAPLAB_THREADS must be an integer, got {cap!r}")
    return max(1, n)


def parallel_map(fn, items, threads):
    """Map over items with a pool; results come back in item order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def energy_sweep(fn, energies, threads, chunk=16):
    """Evaluate a vectorised fn(E_chunk) over chunks; concatenated in order."""
    E = np.asarray(energies, dtype=float)
    chunks = [E[i:i + chunk] for i in range(0, E.size, chunk)]
    parts = parallel_map(fn, chunks, threads)
    return [x for part in parts for x in part]


def parse_energies(text):
    """'1.0', '0.1,0.2' or a grid 'lo:hi:n'."""
    try:
        if text.count(":") == 2:
            lo, hi, n = text.split(":")
            return np.linspace(float(lo), float(hi), int(n))
        return np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError:
        raise UsageError(f"cannot parse energies {text!r}")


def _alpha(text, cfg):
    try:
        return parse_alpha(text, cfg.guard_bits)
    except ValueError as exc:
        raise UsageError(str(exc))


def _rational(text):
    try:
        pq = Fraction(text)
    except ValueError:
        raise UsageError(f"expected p/q, got {text!r}")
    return pq


def _freq_json(alpha):
    if isinstance(alpha, Fraction):
        return {"rational": f"{alpha.numerator}/{alpha.denominator}"}
    return alpha.to_json()


# ----------------------------------------------------------------------------
# subcommands: each returns (json_obj, csv_header, csv_rows, frequency)

def cmd_freq(args, cfg):
    if args.digits:
        alpha = build_frequency(parse_digits(args.digits), guard_bits=cfg.guard_bits)
    elif args.alpha:
        alpha = _alpha(args.alpha, cfg)
    else:
        raise UsageError("freq needs --digits or --alpha")
    if isinstance(alpha, Fraction):
        raise UsageError("freq expects an irrational frequency")
    conv = alpha.convergents
    obj = dict(alpha.to_json())
    obj["convergents"] = [{"p": p, "q": q} for p, q in conv]
    obj["value"] = alpha.value
    obj["beta_hat"] = beta_estimate(alpha, args.beta_window)
    obj["error_bound"] = float(alpha.error_bound())
    rows = [(n, p, q) for n, (p, q) in enumerate(conv)]
    return obj, ["n", "p", "q"], rows, alpha


def cmd_spectrum(args, cfg):
    from .spectrum import gap_labels, spectrum_rational
    pq = _rational(args.alpha)
    spec = gap_labels(spectrum_rational(args.lam, pq, args.tol), check=args.check)
    rows = [("band", b.index, b.lo, b.hi, "", "") for b in spec.bands]
    rows += [("gap", g.j, g.lo, g.hi, g.label, int(g.open)) for g in spec.gaps]
    return spec.to_json(), ["kind", "index", "lo", "hi", "label", "open"], rows, pq


def cmd_butterfly(args, cfg):
    from .spectrum import butterfly
    qs = range(1, args.qmax + 1)

    def one(q):
        return [r for r in butterfly(q, args.lam) if r[1] == q]

    rows = [r for part in parallel_map(one, qs, thread_count(cfg)) for r in part]
    rows = [(f"{p}/{q}", p / q, i, lo, hi) for p, q, i, lo, hi in rows]
    obj = {"lambda": args.lam, "qmax": args.qmax,
           "bands": [{"pq": r[0], "alpha": r[1], "index": r[2], "lo": r[3], "hi": r[4]}
                     for r in rows]}
    return obj, ["pq", "alpha", "index", "lo", "hi"], rows, None


def cmd_ids(args, cfg):
    from .cocycle import rotation_numbers
    from .spectrum import ids_sturm
    alpha = _alpha(args.alpha, cfg)
    Es = parse_energies(args.E)
    threads = thread_count(cfg)
    if args.method == "sturm":
        N = energy_sweep(lambda e: ids_sturm(e, args.lam, alpha, args.theta_grid, args.M),
                         Es, threads)
    else:
        rho = energy_sweep(lambda e: rotation_numbers(args.lam, e, alpha, args.n), Es, threads)
        N = [1 - 2 * r for r in rho]
    rows = [(float(e), float(n)) for e, n in zip(Es, N)]
    obj = {"lambda": args.lam, "alpha": alpha_label(alpha), "method": args.method,
           "points": [{"E": e, "N": n} for e, n in rows]}
    return obj, ["E", "N"], rows, alpha


def cmd_lyap(args, cfg):
    from .cocycle import lyapunov_batch
    alpha = _alpha(args.alpha, cfg)
    Es = parse_energies(args.E)
    est = energy_sweep(lambda e: lyapunov_batch(args.lam, e, alpha, args.n, args.phases,
                                                cfg.seed, args.eps),
                       Es, thread_count(cfg))
    rows = [(float(e), r.mean, r.max, r.min) for e, r in zip(Es, est)]
    obj = {"lambda": args.lam, "alpha": alpha_label(alpha), "eps": args.eps, "n": args.n,
           "phases": args.phases,
           "points": [{"E": e, "L": m, "L_max": mx, "L_min": mn} for e, m, mx, mn in rows]}
    return obj, ["E", "L", "L_max", "L_min"], rows, alpha


def cmd_rot(args, cfg):
    from .cocycle import rotation_numbers
    alpha = _alpha(args.alpha, cfg)
    Es = parse_energies(args.E)
    rho = energy_sweep(lambda e: rotation_numbers(args.lam, e, alpha, args.n), Es,
                       thread_count(cfg))
    rows = [(float(e), float(r), float(1 - 2 * r)) for e, r in zip(Es, rho)]
    obj = {"lambda": args.lam, "alpha": alpha_label(alpha), "n": args.n,
           "points": [{"E": e, "rho": r, "N": n} for e, r, n in rows]}
    return obj, ["E", "rho", "N"], rows, alpha


def cmd_resonances(args, cfg):
    alpha = _alpha(args.alpha, cfg)
    if not isinstance(alpha, IrrationalFrequency):
        raise UsageError("resonances needs an irrational frequency")
    eps0 = args.eps0 if args.eps0 is not None else cfg.eps0(alpha.beta_hat)
    rep = resonances(Fraction(args.theta), eps0, args.K, alpha)
    rows = [(n, d) for n, d in rep.entries]
    return rep.to_json(), ["n", "dist"], rows, alpha


def cmd_localize(args, cfg):
    from .localization import dual_eigenpairs, verify_strong_localization
    alpha = _alpha(args.alpha, cfg)
    which = None
    if args.E is not None:
        which = (args.E - args.E_window, args.E + args.E_window)
    pairs = dual_eigenpairs(args.lam, alpha, args.theta, args.M, which=which, config=cfg,
                            resonance=isinstance(alpha, IrrationalFrequency))
    if not pairs:
        raise StageError("localize", "no eigenpair in the requested window")
    summary = []
    reports = []
    for p in pairs:
        rep = verify_strong_localization(p, cfg.C0, config=cfg) if p.clean else None
        reports.append(rep)
        summary.append({"E": p.E, "center": p.center, "clean": p.clean,
                        "boundary_mass": p.boundary_mass, "residual": p.residual,
                        "decay_rate": p.decay_rate,
                        "C": rep.C if rep else None,
                        "verdict": rep.verdict if rep else None})
    # decay table for the eigenpair closest to --E (or the first clean one)
    if args.E is not None:
        i = int(np.argmin([abs(p.E - args.E) for p in pairs]))
    else:
        i = next((j for j, p in enumerate(pairs) if p.clean), 0)
    p, rep = pairs[i], reports[i]
    C = rep.C if rep else math.nan
    eps1 = rep.eps1 if rep else -math.log(abs(args.lam)) / 64
    u = p.coeffs
    rows = [(int(k), float(u[j]), float(abs(u[j])), C * math.exp(-eps1 * abs(k)))
            for j, k in enumerate(p.ks)]
    obj = {"lambda": args.lam, "alpha": alpha_label(alpha), "theta": args.theta, "M": args.M,
           "pairs": summary, "selected": i}
    return obj, ["k", "u_k", "abs_u_k", "bound"], rows, alpha


def cmd_reduce(args, cfg):
    from .reducibility import reduce_pipeline
    alpha = _alpha(args.alpha, cfg)
    if not isinstance(alpha, IrrationalFrequency):
        raise UsageError("reduce needs an irrational frequency")
    try:
        res = reduce_pipeline(args.lam, alpha, args.E, config=cfg, M=args.window,
                              n_rho=args.n)
    except ArithmeticError as exc:
        raise StageError("reduce/" + str(exc).split(":", 1)[0], exc)
    obj = {"lambda": args.lam, "alpha": alpha.to_json(), **res.to_json()}
    rows = [(r["stage"], r["quantity"], r["value"], r.get("tol"), int(bool(r["ok"])))
            for r in res.ledger]
    return obj, ["stage", "quantity", "value", "tol", "ok"], rows, alpha


def cmd_kamstep(args, cfg):
    from .reducibility import ParabolicForm, gap_certificate, kam_step
    from .trig import TrigMat
    try:
        with open(args.infile, encoding="utf-8") as fh:
            data = json.load(fh)
        lam = float(data["lambda"])
        alpha = IrrationalFrequency.from_json(data["alpha"])
        B = TrigMat.from_json(data["B"])
        nf = data["normal_form"]
        E0 = float(data["E"])
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot read conjugation file: {exc}")
    if "sign" not in nf:
        raise UsageError("kamstep needs a parabolic normal form (gap-edge reduction)")
    Z = ParabolicForm(int(nf["sign"]), float(nf["a"]))
    try:
        rep = kam_step(B, lam, E0, alpha, (args.eps, args.eps / 2), Z=Z)
        cert = gap_certificate(Z, rep.P_mean, [args.eps, -args.eps])
    except (ArithmeticError, ValueError) as exc:
        raise StageError("kamstep", exc)
    obj = {"lambda": lam, "E0": E0, "eps": [args.eps, args.eps / 2],
           "residuals": rep.residuals, "ratio": rep.ratio,
           "pre_residual": rep.pre_residual, "wiring_residual": rep.wiring_residual,
           "closed_form_residual": rep.closed_form_residual,
           "homological_residual": rep.homological_residual,
           "trace_residual": rep.trace_residual, "min_divisor": rep.min_divisor,
           "P_mean": rep.P_mean, "certificate": cert.to_json()}
    rows = [(e, r) for e, r in zip(rep.epsilons, rep.residuals)]
    return obj, ["eps", "residual"], rows, alpha


def cmd_holder(args, cfg):
    from .spectrum import holder_scan
    alpha = _alpha(args.alpha, cfg)
    try:
        rows, expo = holder_scan(alpha, args.qmax, args.lam)
    except ValueError as exc:
        raise UsageError(str(exc))
    rows = [(str(a), str(b), d, h) for a, b, d, h in rows]
    obj = {"lambda": args.lam, "alpha": alpha_label(alpha), "exponent": expo,
           "pairs": [{"alpha1": a, "alpha2": b, "dalpha": d, "dist": h} for a, b, d, h in rows]}
    return obj, ["alpha1", "alpha2", "dalpha", "dist"], rows, alpha


def cmd_verify(args, cfg):
    from .acceptance import CHECKS, SUITES, run_suite
    if args.only:
        try:
            numbers = [int(t) for t in args.only.split(",")]
        except ValueError:
            raise UsageError("--only expects comma-separated criterion numbers")
        bad = [n for n in numbers if n not in CHECKS]
        if bad:
            raise UsageError(f"unknown criteria {bad}")
    elif args.suite in SUITES:
        numbers = SUITES[args.suite]
    else:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {sorted(SUITES)}")
    results = run_suite(numbers=numbers, stream=sys.stderr if args.emit is None else sys.stdout)
    rows = [(r.number, r.name, int(r.passed), r.value, r.threshold, r.seconds) for r in results]
    obj = {"suite": args.suite, "passed": sum(r.passed for r in results),
           "total": len(results), "results": [r.to_json() for r in results]}
    return obj, ["number", "name", "passed", "value", "threshold", "seconds"], rows, None


COMMANDS = {
    "freq": cmd_freq, "spectrum": cmd_spectrum, "butterfly": cmd_butterfly, "ids": cmd_ids,
    "lyap": cmd_lyap, "rot": cmd_rot, "resonances": cmd_resonances,
    "localize": cmd_localize, "reduce": cmd_reduce, "kamstep": cmd_kamstep,
    "holder": cmd_holder, "verify": cmd_verify,
}


# ----------------------------------------------------------------------------
# parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value config file (flags win)")
    common.add_argument("--emit", metavar="PATH",
                        help="write output here (.csv for CSV, else JSON) plus a manifest")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--guard-bits", type=int, dest="guard_bits")
    common.add_argument("--C1", type=float)
    common.add_argument("--C2", type=float)

    p = _Parser(prog="gaplab", description="Almost Mathieu numerical laboratory.")
    p.add_argument("--version", action="version", version=f"gaplab {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text)

    s = add("freq", "continued fraction, convergents and beta estimate")
    s.add_argument("--digits", help="e.g. 1x30 or 1,2,2")
    s.add_argument("--alpha")
    s.add_argument("--beta-window", type=int, default=10, dest="beta_window")

    s = add("spectrum", "bands and labelled gaps for rational alpha")
    s.add_argument("--lambda", type=float, required=True, dest="lam")
    s.add_argument("--alpha", required=True, help="p/q")
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--check", action="store_true", help="cross-check gap IDS by Sturm counts")

    s = add("butterfly", "band edges for all p/q with q <= qmax")
    s.add_argument("--qmax", type=int, required=True)
    s.add_argument("--lambda", type=float, default=1.0, dest="lam")

    s = add("ids", "integrated density of states on an energy grid")
    s.add_argument("--lambda", type=float, required=True, dest="lam")
    s.add_argument("--alpha", required=True)
    s.add_argument("--E", required=True, help="value, list or lo:hi:n")
    s.add_argument("--method", choices=("sturm", "rotation"), default="sturm")
    s.add_argument("--M", type=int, default=400)
    s.add_argument("--theta-grid", type=int, default=16, dest="theta_grid")
    s.add_argument("--n", type=int, default=100_000)

    s = add("lyap", "Lyapunov exponent (phase average and max)")
    s.add_argument("--lambda", type=float, required=True, dest="lam")
    s.add_argument("--alpha", required=True)
    s.add_argument("--E", required=True, help="value, list or lo:hi:n")
    s.add_argument("--eps", type=float, default=0.0)
    s.add_argument("--n", type=int, default=100_000)
    s.add_argument("--phases", type=int, default=8)

    s = add("rot", "fibered rotation number and N = 1 - 2 rho")
    s.add_argument("--lambda", type=float, required=True, dest="lam")
    s.add_argument("--alpha", required=True)
    s.add_argument("--E", required=True, help="value, list or lo:hi:n")
    s.add_argument("--n", type=int, default=100_000)

    s = add("resonances", "epsilon0-resonances of a phase")
    s.add_argument("--theta", type=float, required=True)
    s.add_argument("--alpha", required=True)
    s.add_argument("--eps0", type=float, help="default: config C1 * beta_hat with floor")
    s.add_argument("--K", type=int, default=2000)

    s = add("localize", "dual eigenpairs and windowed decay")
    s.add_argument("--lambda", type=float, required=True, dest="lam")
    s.add_argument("--alpha", required=True)
    s.add_argument("--theta", type=float, required=True)
    s.add_argument("--M", type=int, default=2000)
    s.add_argument("--E", type=float, help="select eigenpairs near this energy")
    s.add_argument("--E-window", type=float, default=0.05, dest="E_window")

    s = add("reduce", "Bloch-wave reduction of the cocycle at an energy")
    s.add_argument("--lambda", type=float, required=True, dest="lam")
    s.add_argument("--alpha", required=True)
    s.add_argument("--E", type=float, required=True)
    s.add_argument("--window", type=int, default=120, help="dual truncation half-width")
    s.add_argument("--n", type=int, default=200_000, help="rotation-number iterates")

    s = add("kamstep", "one KAM step from a reduce output")
    s.add_argument("--in", required=True, dest="infile")
    s.add_argument("--eps", type=float, default=1e-3)

    s = add("holder", "spectrum distance across convergents")
    s.add_argument("--alpha", default="golden:30")
    s.add_argument("--lambda", type=float, default=1.0, dest="lam")
    s.add_argument("--qmax", type=int, default=55)

    s = add("verify", "run the acceptance suite")
    s.add_argument("--suite", default="core")
    s.add_argument("--only", help="comma-separated criterion numbers")
    return p


def _emit(path, obj, header, rows):
    if path.endswith(".csv"):
        text = csv_text(header, rows)
    else:
        text = dumps(obj) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _join_negative(argv):
    """'--E -1:1:5' -> '--E=-1:1:5' so negative values are not read as options."""
    out = []
    for tok in argv:
        if (out and out[-1].startswith("--") and "=" not in out[-1]
                and re.match(r"^-[\d.]", tok)):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def run(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_negative(argv))
        if args.command is None:
            parser.print_help(sys.stderr)
            return 2
        overrides = {k: getattr(args, k, None)
                     for k in ("seed", "threads", "guard_bits", "C1", "C2")}
        try:
            cfg = load_config(args.config, overrides)
        except (OSError, ValueError) as exc:
            raise UsageError(f"config: {exc}")
        manifest = RunManifest(["gaplab"] + argv, cfg.to_json(), seeds={"seed": cfg.seed})
        obj, header, rows, alpha = COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # computation failure inside a module
        print(f"error [{args.command}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    if alpha is not None:
        manifest.frequency = _freq_json(alpha)
    if args.emit:
        _emit(args.emit, obj, header, rows)
        manifest.add_output(args.emit)
        manifest.finish().write(args.emit + ".manifest.json")
    else:
        sys.stdout.write(dumps(obj) + "\n")
    if args.command == "verify":
        return 0 if obj["passed"] == obj["total"] else 1
    return 0


def main():
    sys.exit(run())
