"""Continued-fraction frequencies and exact torus arithmetic.

A frequency alpha is stored as its continued-fraction digits a_1..a_N.
Distances ||k alpha|| are evaluated with integer arithmetic against a
deep convergent p_N/q_N, so they do not suffer from the cancellation
that a bare float of alpha would give for large k.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import mpmath
import numpy as np


class PrecisionExhausted(ValueError):
    """Raised when the stored convergents cannot certify a torus distance."""


@dataclass(frozen=True)
class IrrationalFrequency:
    """Frequency alpha = [0; a_1, a_2, ..., a_N, ...].

    Parameters
    ----------
    digits : tuple of int
        Continued-fraction digits, all >= 1.
    guard_bits : int
        Requested absolute accuracy 2**-guard_bits for torus distances.
    truncated : bool
        True when digit extraction from a float stopped because the next
        digit could not be certified.
    rational : Fraction or None
        Set when the expansion terminated, i.e. alpha is rational.
    """

    digits: tuple
    guard_bits: int = 32
    truncated: bool = False
    rational: Fraction | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        digits = tuple(int(a) for a in self.digits)
        if len(digits) == 0:
            raise ValueError("at least one digit is required")
        if min(digits) < 1:
            raise ValueError("continued-fraction digits must be >= 1")
        object.__setattr__(self, "digits", digits)

    @cached_property
    def convergents(self):
        """List of (p_n, q_n) for n = 0..N with p_0 = 0, q_0 = 1."""
        p_prev, q_prev = 1, 0
        p, q = 0, 1
        out = [(p, q)]
        for a in self.digits:
            p, p_prev = a * p + p_prev, p
            q, q_prev = a * q + q_prev, q
            out.append((p, q))
        return out

    @property
    def n_digits(self):
        return len(self.digits)

    @cached_property
    def value(self):
        """Best double approximation of alpha (from the deepest convergent)."""
        if self.rational is not None:
            return float(self.rational)
        p, q = self.convergents[-1]
        return float(Fraction(p, q))

    @cached_property
    def beta_hat(self):
        return beta_estimate(self)

    def denominators(self):
        return [q for _, q in self.convergents]

    def error_bound(self):
        """Upper bound on |alpha - p_N/q_N| (zero if alpha is rational)."""
        if self.rational is not None:
            return Fraction(0)
        (_, qm), (_, qn) = self.convergents[-2], self.convergents[-1]
        # the unknown tail digit is >= 1, so q_{N+1} >= q_N + q_{N-1}
        return Fraction(1, qn * (qn + qm))

    def to_json(self):
        out = {"digits": list(self.digits), "guard_bits": self.guard_bits}
        if self.truncated:
            out["truncated"] = True
        if self.rational is not None:
            out["rational"] = f"{self.rational.numerator}/{self.rational.denominator}"
        return out

    @classmethod
    def from_json(cls, obj):
        rational = obj.get("rational")
        if rational is not None:
            rational = Fraction(rational)
        return cls(tuple(obj["digits"]), int(obj.get("guard_bits", 32)),
                   bool(obj.get("truncated", False)), rational)

    def __repr__(self):
        head = ",".join(str(a) for a in self.digits[:8])
        more = "..." if self.n_digits > 8 else ""
        return f"IrrationalFrequency([0;{head}{more}], N={self.n_digits})"


def build_frequency(digits=None, real_sample=None, digit_budget=30,
                    guard_bits=32, sample_error=None):
    """Build a frequency from digits or from a real sample.

    Parameters
    ----------
    digits : sequence of int, optional
        Continued-fraction digits a_1..a_N.
    real_sample : float, optional
        Value in (0, 1). Digits are extracted with the Gauss map
        a_k = floor(1/alpha_{k-1}) on an uncertainty interval; a digit is
        emitted only when the interval does not straddle an integer.
    digit_budget : int
        Maximum number of digits extracted from ``real_sample``.
    sample_error : float, optional
        Half-width of the initial uncertainty interval. Defaults to a few
        ulps of ``real_sample``.

    Returns
    -------
    IrrationalFrequency
        With ``rational`` set when the expansion terminates and
        ``truncated`` set when a digit could not be certified.
    """
    if digits is not None:
        return IrrationalFrequency(tuple(digits), guard_bits)
    if real_sample is None:
        raise ValueError("give digits or real_sample")
    x = float(real_sample)
    if not 0.0 < x < 1.0:
        raise ValueError("real_sample must lie in (0, 1)")
    if sample_error is None:
        sample_error = 4.0 * np.spacing(x)
    lo, hi = x - sample_error, x + sample_error
    out = []
    truncated = False
    rational = False
    with mpmath.workprec(200):
        lo, hi = mpmath.mpf(lo), mpmath.mpf(hi)
        for _ in range(digit_budget):
            if lo <= 0:
                # alpha_k may be zero: the expansion has ended
                rational = hi < 2.0 ** -20
                truncated = not rational
                break
            rlo, rhi = 1 / hi, 1 / lo
            a_lo, a_hi = int(mpmath.floor(rlo)), int(mpmath.floor(rhi))
            if a_lo == a_hi:
                out.append(a_lo)
                lo, hi = rlo - a_lo, rhi - a_lo
                continue
            # the interval straddles the integer a_hi
            if a_hi - a_lo == 1 and (rhi - rlo) < 2.0 ** -20:
                out.append(a_hi)
                rational = True
            else:
                truncated = True
            break
    if not out:
        raise ValueError("could not certify any digit of the sample")
    freq = IrrationalFrequency(tuple(out), guard_bits, truncated)
    if rational:
        p, q = freq.convergents[-1]
        freq = IrrationalFrequency(tuple(out), guard_bits, False, Fraction(p, q))
    return freq


def golden(n_digits=30, guard_bits=32):
    return IrrationalFrequency((1,) * n_digits, guard_bits, name=f"golden:{n_digits}")


def _distance_exact(offset: Fraction, k: int, alpha: IrrationalFrequency):
    """Exact ||offset - k p_N/q_N|| as a Fraction."""
    if alpha.rational is not None:
        p, q = alpha.rational.numerator, alpha.rational.denominator
    else:
        p, q = alpha.convergents[-1]
    num, den = offset.numerator, offset.denominator
    big = den * q
    r = (num * q - k * p * den) % big
    return Fraction(min(r, big - r), big)


def _check_precision(k, alpha):
    if alpha.rational is not None or k == 0:
        return
    err = abs(k) * alpha.error_bound()
    if err >= Fraction(1, 2 ** alpha.guard_bits):
        # estimate how many more digits the growth rate would need
        qn = alpha.convergents[-1][1]
        rate = max(math.log(qn) / alpha.n_digits, 1e-3)
        need_log = math.log(abs(k)) + alpha.guard_bits * math.log(2)
        have_log = 2 * math.log(qn)
        extra = max(1, math.ceil((need_log - have_log) / (2 * rate)))
        raise PrecisionExhausted(
            f"precision exhausted: |k|={abs(k)} with guard_bits={alpha.guard_bits} "
            f"needs about {alpha.n_digits + extra} digits, have {alpha.n_digits}")


def torus_distance(k, alpha, offset=0):
    """||offset - k*alpha||_{R/Z} with certified error < 2**-guard_bits.

    Parameters
    ----------
    k : int
        Integer multiple (nonzero unless ``offset`` is given).
    alpha : IrrationalFrequency
    offset : float or Fraction
        Optional shift; the result is ||offset - k alpha||.

    Returns
    -------
    float
    """
    k = int(k)
    if k == 0 and offset == 0:
        raise ValueError("k must be nonzero")
    _check_precision(k, alpha)
    return float(_distance_exact(Fraction(offset), k, alpha))


def distance_table(offset, K, alpha):
    """Exact distances ||offset - k alpha|| for k = -K..K, as integer numerators.

    Returns
    -------
    numerators : list of int
        Numerators over a common denominator, index k + K.
    denominator : int
    """
    _check_precision(K, alpha)
    if alpha.rational is not None:
        p, q = alpha.rational.numerator, alpha.rational.denominator
    else:
        p, q = alpha.convergents[-1]
    off = Fraction(offset)
    num, den = off.numerator, off.denominator
    big = den * q
    base = num * q
    step = p * den
    out = []
    for k in range(-K, K + 1):
        r = (base - k * step) % big
        out.append(min(r, big - r))
    return out, big


def beta_estimate(alpha, tail_window=10):
    """Finite-sample estimate of beta = limsup ln(q_{n+1})/q_n.

    Takes the maximum of ln(q_{n+1})/q_n over the last ``tail_window``
    indices. The value is not monotone in the window length.
    """
    qs = alpha.denominators()
    ratios = [math.log(qs[n + 1]) / qs[n] for n in range(len(qs) - 1)]
    if not ratios:
        return 0.0
    return max(ratios[-tail_window:])


def synth_beta_frequency(beta_target, n_digits, seed=0, mode="dense", stride=3,
                         max_digit_bits=65536, strict=False, guard_bits=32):
    """Frequency whose digits make ln(q_{n+1})/q_n close to ``beta_target``.

    At a big-digit index n+1 the digit is chosen so that q_{n+1} is close
    to exp(beta * q_n). Other indices get 1 + a small pseudo-random jitter.

    Parameters
    ----------
    beta_target : float
        Target exponent (> 0).
    n_digits : int
    seed : int
        Seed of the jitter digits.
    mode : {"dense", "sparse"}
        "dense" tries a big digit at every index, "sparse" only at every
        ``stride``-th index.
    max_digit_bits : int
        Largest admissible bit length of a single digit.
    strict : bool
        If True, raise when a big digit would exceed ``max_digit_bits``.
        Otherwise the remaining indices fall back to jitter digits.
    """
    if beta_target <= 0:
        raise ValueError("beta_target must be positive")
    rng = np.random.default_rng(seed)
    jitter = 1 + rng.integers(0, 2, size=n_digits)
    digits = []
    q_prev, q = 0, 1
    saturated = False
    for n in range(n_digits):
        big = (mode == "dense") or (n % stride == stride - 1)
        a = int(jitter[n])
        if big and not saturated:
            bits = beta_target * q / math.log(2)
            if bits > max_digit_bits:
                if strict:
                    raise OverflowError(
                        f"digit {n + 1} needs about {int(bits)} bits; "
                        f"max feasible n_digits = {n}")
                saturated = True
            else:
                with mpmath.workprec(int(bits) + 64):
                    target = (mpmath.exp(mpmath.mpf(beta_target) * q) - q_prev) / q
                    a = max(1, int(mpmath.nint(target)))
        digits.append(a)
        q, q_prev = a * q + q_prev, q
    name = f"beta:{beta_target}:{n_digits}:{seed}"
    return IrrationalFrequency(tuple(digits), guard_bits, name=name)


def smallest_divisor(k_max, alpha):
    """min over 0 < |j| <= k_max of ||j alpha||, by exact scan."""
    k_max = int(k_max)
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    _check_precision(k_max, alpha)
    if alpha.rational is not None:
        p, q = alpha.rational.numerator, alpha.rational.denominator
    else:
        p, q = alpha.convergents[-1]
    best = q
    for j in range(1, k_max + 1):
        r = (j * p) % q
        best = min(best, r, q - r)
    return float(Fraction(best, q))


@dataclass(frozen=True)
class ResonanceReport:
    """Ordered epsilon0-resonances of a phase theta."""

    theta: float
    epsilon0: float
    K: int
    entries: tuple  # of (n_j, dist_j)
    truncated: bool

    @property
    def sites(self):
        return [n for n, _ in self.entries]

    def to_json(self):
        return {"theta": self.theta, "epsilon0": self.epsilon0, "K": self.K,
                "truncated": self.truncated,
                "entries": [{"n": n, "dist": d} for n, d in self.entries]}


def _scan_resonances(nums, fl, den, c, K, epsilon0):
    """Resonance scan on an exact distance table centred at index c.

    ``nums[c + k]`` is the numerator of ||2 theta - k alpha|| over ``den``;
    ``fl`` holds the same values as correctly rounded floats. A float
    prefilter finds the few m where a resonance is possible; the
    minimality test itself is exact.
    """
    entries = [(0, float(fl[c]))]
    if K < 1:
        return entries
    m = np.arange(1, K + 1)
    dp = fl[c + 1:c + K + 1]
    dm = fl[c - K:c][::-1]
    slack = np.exp(-epsilon0 * m) * (1 + 1e-9)
    cand = np.nonzero(np.minimum(dp, dm) <= slack)[0] + 1
    for mm in cand:
        mm = int(mm)
        best = min(nums[c - mm + 1:c + mm])
        a, b = nums[c + mm], nums[c - mm]
        thresh = math.exp(-epsilon0 * mm)
        if a < best and a <= b and float(Fraction(a, den)) <= thresh:
            entries.append((mm, float(Fraction(a, den))))
        elif b < best and b < a and float(Fraction(b, den)) <= thresh:
            entries.append((-mm, float(Fraction(b, den))))
    return entries


class ResonanceTable:
    """Exact distances ||2 theta - j alpha||, |j| <= K, reusable for shifted phases.

    ``report(shift, K)`` gives the resonances of theta + shift * alpha,
    using ||2(theta + s alpha) - k alpha|| = ||2 theta - (k - 2s) alpha||.
    """

    def __init__(self, theta, K, alpha):
        self.theta = Fraction(theta)
        self.alpha = alpha
        self.K = int(K)
        self.nums, self.den = distance_table(2 * self.theta, self.K, alpha)
        self.fl = np.array([n / self.den for n in self.nums])

    def report(self, epsilon0, K, shift=0):
        if epsilon0 <= 0 or K < 1:
            raise ValueError("need epsilon0 > 0 and K >= 1")
        c = self.K - 2 * int(shift)
        if c - K < 0 or c + K > 2 * self.K:
            raise ValueError("table too short for this shift")
        entries = _scan_resonances(self.nums, self.fl, self.den, c, K, epsilon0)
        truncated = math.exp(-epsilon0 * K) > 2.0 ** -self.alpha.guard_bits
        th = self.theta + shift * _alpha_fraction(self.alpha)
        return ResonanceReport(float(th % 1), float(epsilon0), int(K), tuple(entries),
                               truncated)


def _alpha_fraction(alpha):
    if alpha.rational is not None:
        return alpha.rational
    p, q = alpha.convergents[-1]
    return Fraction(p, q)


def resonances(theta, epsilon0, K, alpha):
    """epsilon0-resonances of theta with |k| <= K.

    k is a resonance if ||2 theta - k alpha|| <= exp(-epsilon0 |k|) and the
    distance is minimal over |i| <= |k|. Ties go to the smaller |k|, then to
    the positive k. k = 0 is always listed.
    """
    if epsilon0 <= 0 or K < 1:
        raise ValueError("need epsilon0 > 0 and K >= 1")
    table = ResonanceTable(theta, K, alpha)
    rep = table.report(epsilon0, K)
    return ResonanceReport(float(theta), rep.epsilon0, rep.K, rep.entries, rep.truncated)


def parse_alpha(text, guard_bits=32):
    """Parse a frequency string.

    Accepted forms: ``p/q`` (rational, returns Fraction), ``golden:N``,
    ``silver:N``, ``beta:B:N[:seed]``, ``digits:1,2,3``, ``1x30`` style
    digit runs, and ``0.123:N`` for a real sample with a digit budget.
    """
    text = text.strip()
    if re.fullmatch(r"-?\d+/\d+", text):
        frac = Fraction(text)
        if frac.denominator < 1:
            raise ValueError("bad rational")
        return frac
    head, _, rest = text.partition(":")
    if head == "golden":
        return golden(int(rest or 30), guard_bits)
    if head in ("silver", "sqrt2"):
        n = int(rest or 30)
        return IrrationalFrequency((2,) * n, guard_bits, name=f"silver:{n}")
    if head == "beta":
        parts = rest.split(":")
        beta, n = float(parts[0]), int(parts[1])
        seed = int(parts[2]) if len(parts) > 2 else 0
        return synth_beta_frequency(beta, n, seed, guard_bits=guard_bits)
    if head == "digits":
        return build_frequency(parse_digits(rest), guard_bits=guard_bits)
    if re.fullmatch(r"[\dx,]+", text):
        return build_frequency(parse_digits(text), guard_bits=guard_bits)
    if re.fullmatch(r"0?\.\d+(:\d+)?", text):
        budget = int(rest) if rest else 30
        return build_frequency(real_sample=float(head), digit_budget=budget,
                               guard_bits=guard_bits)
    raise ValueError(f"cannot parse frequency {text!r}")


def parse_digits(text):
    """'1,2,2' or '1x30' or '1x5,2x3' -> list of ints."""
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "x" in tok:
            a, n = tok.split("x")
            out.extend([int(a)] * int(n))
        else:
            out.append(int(tok))
    return out


def alpha_float(alpha):
    if isinstance(alpha, Fraction):
        return float(alpha)
    if isinstance(alpha, IrrationalFrequency):
        return alpha.value
    return float(alpha)


def alpha_label(alpha):
    if isinstance(alpha, Fraction):
        return f"{alpha.numerator}/{alpha.denominator}"
    if isinstance(alpha, IrrationalFrequency):
        return alpha.name or repr(alpha)
    return repr(alpha)


def orbit_offsets(alpha, n):
    """frac(k alpha) for k = 0..n-1, reduced with integer arithmetic.

    Uses the shallowest convergent whose substitution error stays below
    1e-18 over the whole range, so long products see no phase drift.
    """
    if isinstance(alpha, Fraction):
        p, q = alpha.numerator, alpha.denominator
    elif isinstance(alpha, IrrationalFrequency) and alpha.rational is None:
        conv = alpha.convergents
        p, q = conv[-1]
        for i in range(1, len(conv) - 1):
            pi, qi = conv[i]
            if n / (qi * conv[i + 1][1]) < 1e-18 and qi > 2 ** 64:
                p, q = pi, qi
                break
    elif isinstance(alpha, IrrationalFrequency):
        p, q = alpha.rational.numerator, alpha.rational.denominator
    else:
        a = float(alpha)
        return np.mod(np.arange(n) * a, 1.0)
    if q < 2 ** 62:
        pm = p % q
        vals = [(k * pm) % q for k in range(n)]
        return np.array(vals, dtype=float) / q
    vals = [Fraction((k * p) % q, q) for k in range(n)]
    return np.array([float(v) for v in vals])
