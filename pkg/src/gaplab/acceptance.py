"""Acceptance suite: thirteen property checks with exact identities as oracles.

Each ``check_*`` function runs one experiment and returns a
:class:`CriterionResult`. ``run_suite`` runs a selection and prints one
pass/fail line per criterion.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cocycle import (lyapunov_batch, rotation_numbers, transfer_bound_check,
                      uniform_hyperbolicity_batch)
from .frequency import (beta_estimate, golden, parse_alpha, resonances,
                        synth_beta_frequency)
from .localization import dual_eigenpairs, verify_strong_localization
from .reducibility import (ParabolicForm, kam_step, kam_step_general,
                           matrix_homological_solve, rational_edge_certificate,
                           reduce_pipeline, scalar_homological_solve)
from .spectrum import (approximant, band_samples, gap_labels, hausdorff_distance,
                       holder_scan, ids_sturm, scaled, spectrum_rational, theta_harmonics)
from .trig import TrigMat, TrigSeries, expm2


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    value: float
    threshold: str
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return (f"[{mark}] {self.number:2d} {self.name:<28s} value={self.value:.4g} "
                f"({self.threshold}) {self.seconds:.1f}s")

    def to_json(self):
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "value": self.value, "threshold": self.threshold,
                "seconds": self.seconds, "details": self.details}


def _timed(fn):
    def wrapper(*args, **kw):
        t = time.perf_counter()
        res = fn(*args, **kw)
        res.seconds = time.perf_counter() - t
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ----------------------------------------------------------------------------
# Lyapunov exponents and rotation numbers

@_timed
def check_lyapunov_identity(n_iters=100_000, n_energies=20):
    """L(E) = max(ln lam, 0) on the spectrum, rational and irrational alpha."""
    worst = 0.0
    rows = []
    for lam in (0.5, 2.0):
        for alpha in (Fraction(34, 55), golden(30)):
            pq = approximant(alpha, 55)
            Es = band_samples(spectrum_rational(lam, pq), n_energies, seed=1)
            est = lyapunov_batch(lam, Es, alpha, n_iters, 8, 0)
            err = max(abs(e.mean - max(math.log(lam), 0.0)) for e in est)
            rows.append({"lambda": lam, "alpha": str(alpha), "max_error": err})
            worst = max(worst, err)
    return CriterionResult(1, "lyapunov identity", worst <= 0.02, worst, "<= 0.02",
                           details={"cases": rows})


@_timed
def check_complexified_lyapunov(n_iters=100_000, n_energies=5):
    """L(eps) = max(ln lam + 2 pi |eps|, 0) for energies in the spectrum."""
    lam = 0.5
    alpha = golden(30)
    eta = math.log(2) / (2 * math.pi)
    Es = band_samples(spectrum_rational(lam, approximant(alpha, 89)), n_energies, seed=2)
    worst = 0.0
    rows = []
    for eps in (0.0, eta / 2, -eta / 2, eta, -eta, eta + 0.05):
        target = 2 * math.pi * 0.05 if eps > eta else 0.0
        est = lyapunov_batch(lam, Es, alpha, n_iters, 8, 0, eps=eps)
        err = max(abs(e.mean - target) for e in est)
        rows.append({"eps": eps, "target": target, "max_error": err})
        worst = max(worst, err)
    return CriterionResult(2, "complexified lyapunov", worst <= 0.02, worst, "<= 0.02",
                           details={"cases": rows})


@_timed
def check_ids_consistency(M=2000, n_iters=100_000):
    """1 - 2 rho agrees with the Sturm-count IDS on a 50-point grid."""
    lam, pq = 0.5, Fraction(5, 8)
    Es = np.linspace(-3.2, 3.2, 50)
    rho = rotation_numbers(lam, Es, pq, n_iters)
    N = ids_sturm(Es, lam, pq, 16, M)
    err = float(np.max(np.abs((1 - 2 * rho) - N)))
    tol = 2.0 / M + 5.0 / n_iters
    return CriterionResult(3, "ids consistency", err <= tol, err, f"<= {tol:.3g}")


# ----------------------------------------------------------------------------
# rational spectra

_QS = (Fraction(3, 5), Fraction(5, 8), Fraction(8, 13))


@_timed
def check_gap_labeling():
    """Every gap has IDS j/q (Sturm check) and a label l with l p = j mod q."""
    exceptions = []
    n_gaps = 0
    for pq in _QS:
        try:
            spec = gap_labels(spectrum_rational(0.5, pq), check=True)
        except AssertionError as exc:
            exceptions.append(f"{pq}: {exc}")
            continue
        for g in spec.gaps:
            n_gaps += 1
            if (g.label * pq.numerator - g.j) % pq.denominator != 0:
                exceptions.append(f"{pq}: gap {g.j} label {g.label}")
    return CriterionResult(4, "gap labeling", not exceptions, float(len(exceptions)),
                           "== 0 exceptions",
                           details={"gaps": n_gaps, "exceptions": exceptions})


@_timed
def check_aubry_duality():
    """Sigma_{2, p/q} = 2 Sigma_{1/2, p/q}."""
    worst = 0.0
    for pq in _QS:
        d = hausdorff_distance(spectrum_rational(2.0, pq), scaled(spectrum_rational(0.5, pq), 2))
        worst = max(worst, d)
    return CriterionResult(5, "aubry duality", worst <= 1e-6, worst, "<= 1e-6")


@_timed
def check_holder_exponent(q_max=55, lam=1.0):
    """Fitted exponent of Hausdorff distance against |alpha1 - alpha2|."""
    rows, slope = holder_scan(golden(30), q_max, lam)
    xs = [r[2] for r in rows]
    ys = [r[3] for r in rows]
    return CriterionResult(6, "holder exponent", slope >= 0.4, slope, ">= 0.4",
                           details={"dalpha": xs, "dist": ys})


@_timed
def check_chambers(n_energies=7):
    """Delta(E, theta) contains only the harmonics 0 and +-q, amplitude 2 lam^q."""
    worst_rel = 0.0
    worst_amp = 0.0
    for q in (3, 5, 8):
        pq = Fraction({3: 2, 5: 3, 8: 5}[q], q)
        for lam in (0.3, 0.7):
            for E in np.linspace(-2.5, 2.5, n_energies):
                c, n = theta_harmonics(E, lam, pq)
                power = np.abs(c) ** 2
                keep = np.zeros(n, dtype=bool)
                keep[[0, q, n - q]] = True
                rel = float(power[~keep].sum() / power.sum())
                amp = float(abs(2 * abs(c[q]) - 2 * abs(lam) ** q))
                worst_rel = max(worst_rel, rel)
                worst_amp = max(worst_amp, amp)
    ok = worst_rel <= 1e-9 and worst_amp <= 1e-8
    return CriterionResult(12, "chambers structure", ok, worst_rel,
                           "rel <= 1e-9, amp err <= 1e-8",
                           details={"relative_energy": worst_rel, "amplitude_error": worst_amp})


# ----------------------------------------------------------------------------
# localization and resonances

@_timed
def check_strong_localization(lam=0.05, theta=0.19, M=2000):
    """Windowed decay with fitted C <= 1e3 and rate >= 0.8 L for clean pairs."""
    pairs = dual_eigenpairs(lam, golden(40), theta, M)
    clean = [p for p in pairs if p.clean]
    L = -math.log(lam)
    reps = [verify_strong_localization(p) for p in clean]
    C = max(r.C for r in reps)
    rate = min(r.min_rate for r in reps)
    ok = bool(clean) and math.isfinite(C) and C <= 1e3 and rate >= 0.8 * L
    return CriterionResult(7, "strong localization", ok, C, "C <= 1e3, rate >= 0.8 L",
                           details={"clean_pairs": len(clean), "pairs": len(pairs),
                                    "min_rate": rate, "L": L})


def brute_force_resonances(theta, epsilon0, K, alpha):
    """Resonances of theta by a direct scan in exact rational arithmetic.

    alpha is replaced by its deepest convergent. k is kept when its distance
    is <= exp(-epsilon0 |k|) and strictly below every |j| < |k|; between k
    and -k the positive one wins ties.
    """
    p, q = alpha.convergents[-1]
    a = Fraction(p, q)
    two_theta = 2 * Fraction(theta)

    def dist(k):
        x = (two_theta - k * a) % 1
        return min(x, 1 - x)

    best = dist(0)
    out = [(0, float(best))]
    for m in range(1, K + 1):
        dp, dm = dist(m), dist(-m)
        thresh = math.exp(-epsilon0 * m)
        if dp < best and dp <= dm and float(dp) <= thresh:
            out.append((m, float(dp)))
        elif dm < best and dm < dp and float(dm) <= thresh:
            out.append((-m, float(dm)))
        best = min(best, dp, dm)
    return out


@_timed
def check_resonance_oracle(n_cases=100, K=2000, seed=0):
    """resonances() matches the brute-force scan exactly."""
    rng = np.random.default_rng(seed)
    alpha = golden(60)
    mismatches = []
    n_res = 0
    for i in range(n_cases):
        theta = float(rng.uniform(0, 1))
        eps0 = float(math.exp(rng.uniform(math.log(1e-3), 0.0)))
        got = list(resonances(theta, eps0, K, alpha).entries)
        ref = brute_force_resonances(theta, eps0, K, alpha)
        n_res += len(ref)
        if got != ref:
            mismatches.append({"theta": theta, "epsilon0": eps0})
    return CriterionResult(8, "resonance oracle", not mismatches, float(len(mismatches)),
                           "== 0 mismatches",
                           details={"cases": n_cases, "resonances": n_res,
                                    "mismatches": mismatches})


# ----------------------------------------------------------------------------
# homological equations, KAM step, gap certificate

@_timed
def check_homological_solvers(N=1024, n_cases=50, decay=0.05, seed=0):
    """Grid residuals of both solvers relative to the size of the right-hand side.

    Right-hand sides are random with an analytic envelope exp(-decay |k|),
    which is the class the solvers are meant for.
    """
    alpha = parse_alpha("golden:30")
    rng = np.random.default_rng(seed)
    ks = np.arange(-N, N + 1)
    env = np.exp(-decay * np.abs(ks))
    w_scalar = w_matrix = 0.0
    for i in range(n_cases):
        c = (rng.normal(size=2 * N + 1) + 1j * rng.normal(size=2 * N + 1)) * env
        sign = 1 if i % 2 == 0 else -1
        period = 1 if i % 4 < 2 else 2
        sol = scalar_homological_solve(TrigSeries(c, period), alpha, sign=sign)
        w_scalar = max(w_scalar, sol.grid_residual)
        T = (rng.normal(size=(2, 2, 2 * N + 1)) + 1j * rng.normal(size=(2, 2, 2 * N + 1))) * env
        T[1, 1] = -T[0, 0]
        Tm = TrigMat(T, period)
        Z = ParabolicForm(sign, float(rng.normal()))
        m = matrix_homological_solve(Z, Tm, alpha)
        w_matrix = max(w_matrix, m.grid_residual / Tm.sup_norm())
    worst = max(w_scalar, w_matrix)
    return CriterionResult(9, "homological solvers", worst <= 1e-9, worst, "<= 1e-9",
                           details={"scalar": w_scalar, "matrix": w_matrix})


def synthetic_kam_case(a=0.3, amp=0.3, degree=3, N=64, seed=0):
    """Z = [[1, a], [0, 1]] and P = Z B^{-1} K B with B = exp(X), X traceless.

    K = [[0, 1], [0, 0]] is traceless, so tr(Z^{-1} P) = 0 as required.
    """
    rng = np.random.default_rng(seed)
    n = 8 * (2 * N + 1)
    x = np.arange(n) / n
    X = np.zeros((n, 2, 2))
    for k in range(1, degree + 1):
        c, s = rng.normal(size=(2, 3)) * amp / k
        for i, basis in enumerate(([[1, 0], [0, -1]], [[0, 1], [0, 0]], [[0, 0], [1, 0]])):
            X += (c[i] * np.cos(2 * np.pi * k * x) + s[i] * np.sin(2 * np.pi * k * x))[:, None, None] \
                * np.asarray(basis, dtype=float)
    B = expm2(X)
    K = np.array([[0.0, 1.0], [0.0, 0.0]])
    Z = ParabolicForm(1, a)
    Pg = Z.matrix @ np.linalg.inv(B) @ K @ B
    return Z, TrigMat.from_grid(Pg, 1, N)


@_timed
def check_kam_second_order(eps=1e-3):
    """Residual ratio at eps and eps/2 lies in [3.5, 4.5], synthetic and pipeline."""
    alpha = parse_alpha("golden:30")
    Z, P = synthetic_kam_case()
    syn = kam_step_general(Z, P, alpha, (eps, eps / 2))
    lam, E = 0.05, -0.7757219870081623
    res = reduce_pipeline(lam, alpha, E, n_rho=20_000)
    pipe = kam_step(res.B, lam, res.E, alpha, (eps, eps / 2), Z=res.normal_form)
    ratios = [syn.ratio, pipe.ratio]
    ok = all(3.5 <= r <= 4.5 for r in ratios)
    worst = max(ratios, key=lambda r: abs(r - 4))
    return CriterionResult(10, "kam second order", ok, worst, "in [3.5, 4.5]",
                           details={"synthetic": {"ratio": syn.ratio, "residuals": syn.residuals},
                                    "pipeline": {"ratio": pipe.ratio, "residuals": pipe.residuals,
                                                 "E": res.E, "a": res.normal_form.a}})


@_timed
def check_gap_certificate(lam=0.3, eps=1e-3, q_max=13, n_hyp=200_000):
    """Certificate verdicts at E0 +- eps against the hyperbolicity test.

    The growth floor of the test is max(1e-4, 20/n); at eps = 1e-3 the true
    exponent is about 8e-4, so the test runs with n = 2e5 iterates.
    """
    convs = [Fraction(p, q) for p, q in golden(30).convergents if 2 <= q <= q_max]
    total = agree = side_ok = 0
    misses = []
    for pq in convs:
        sp = gap_labels(spectrum_rational(lam, pq), check=False)
        edges = []
        for g in sp.gaps:
            if g.open:
                edges += [(g.lo, 1, g.label), (g.hi, -1, g.label)]
        Es = [e for E0, _, _ in edges for e in (E0 + eps, E0 - eps)]
        uh = uniform_hyperbolicity_batch(lam, Es, pq, n=n_hyp)
        for i, (E0, side, label) in enumerate(edges):
            c = rational_edge_certificate(lam, pq, E0, [eps, -eps])
            cv = [v.verdict == "hyperbolic" for v in c.certificate.verdicts]
            hv = [uh[2 * i].verdict is True, uh[2 * i + 1].verdict is True]
            total += 1
            agree += cv == hv
            side_ok += c.certificate.hyperbolic_side == side
            if cv != hv:
                misses.append({"pq": str(pq), "label": label, "E0": E0})
    frac = agree / total
    return CriterionResult(11, "gap certificate", frac >= 0.95, frac, ">= 0.95",
                           details={"edges": total, "agree": agree,
                                    "side_matches_spectrum": side_ok, "misses": misses})


@_timed
def check_transfer_bound(k=10_000):
    """(1/k) log ||A_k|| <= beta_hat + 0.1 over the strip |Im x| <= eta."""
    lam = 0.5
    alpha = synth_beta_frequency(0.2, 30, 0)
    b = beta_estimate(alpha)
    Es = band_samples(spectrum_rational(lam, approximant(alpha, 200)), 10, 0)
    worst = float(np.max(transfer_bound_check(lam, Es, alpha, k, n_real=16, n_imag=4)))
    return CriterionResult(13, "transfer bound", worst <= b + 0.1, worst,
                           f"<= beta_hat + 0.1 = {b + 0.1:.3g}", details={"beta_hat": b})


CHECKS = {
    1: check_lyapunov_identity,
    2: check_complexified_lyapunov,
    3: check_ids_consistency,
    4: check_gap_labeling,
    5: check_aubry_duality,
    6: check_holder_exponent,
    7: check_strong_localization,
    8: check_resonance_oracle,
    9: check_homological_solvers,
    10: check_kam_second_order,
    11: check_gap_certificate,
    12: check_chambers,
    13: check_transfer_bound,
}

SUITES = {
    "core": tuple(CHECKS),
    "quick": (4, 5, 6, 8, 12),
}


def run_suite(name="core", numbers=None, stream=sys.stdout):
    """Run a suite and print one line per criterion; returns the results."""
    if numbers is None:
        if name not in SUITES:
            raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
        numbers = SUITES[name]
    out = []
    for n in numbers:
        res = CHECKS[n]()
        out.append(res)
        if stream is not None:
            print(res.line(), file=stream, flush=True)
    if stream is not None:
        passed = sum(r.passed for r in out)
        print(f"{passed}/{len(out)} criteria passed", file=stream)
    return out
