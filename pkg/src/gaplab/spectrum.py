"""Bands, gaps and integrated density of states for rational frequencies.

For alpha = p/q the spectrum (union over theta) is a union of q bands.
The q-step discriminant Delta(E, theta) = tr A_q depends on theta only
through one harmonic cos(2 pi q theta + phase), so the band edges are the
roots of two one-variable functions: the discriminant at the theta that
maximises it and at the theta that minimises it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.linalg import eigvalsh

from .frequency import IrrationalFrequency, alpha_float, orbit_offsets


def as_fraction(pq):
    if isinstance(pq, Fraction):
        return pq
    if isinstance(pq, tuple):
        return Fraction(*pq)
    if isinstance(pq, str):
        return Fraction(pq)
    raise TypeError(f"expected a rational frequency, got {pq!r}")


def rational_phases(theta, pq):
    """theta + j p/q mod 1 for j = 0..q-1 (exact fractional parts)."""
    p, q = pq.numerator, pq.denominator
    offs = np.array([(j * p) % q for j in range(q)], dtype=float) / q
    return np.mod(np.add.outer(np.asarray(theta, dtype=float), offs), 1.0)


def discriminant(E, theta, lam, pq):
    """Delta(E, theta) = tr A_q(theta) for alpha = p/q.

    ``E`` and ``theta`` broadcast against each other.
    """
    pq = as_fraction(pq)
    E, theta = np.broadcast_arrays(np.asarray(E, dtype=float),
                                   np.asarray(theta, dtype=float))
    ph = rational_phases(theta, pq)
    a = np.ones(E.shape)
    b = np.zeros(E.shape)
    c = np.zeros(E.shape)
    d = np.ones(E.shape)
    for j in range(pq.denominator):
        t = E - 2.0 * lam * np.cos(2 * np.pi * ph[..., j])
        a, b, c, d = t * a - c, t * b - d, a, b
    out = a + d
    return out if out.ndim else float(out)


def theta_harmonics(E, lam, pq, n_theta=None):
    """theta-DFT of Delta(E, .): returns (coefficients, n_theta).

    Coefficient k multiplies exp(2 pi i k theta).
    """
    pq = as_fraction(pq)
    q = pq.denominator
    n = n_theta or max(4 * q, 16)
    th = np.arange(n) / n
    vals = discriminant(np.full(n, float(E)), th, lam, pq)
    return np.fft.fft(vals) / n, n


def extremal_thetas(lam, pq, check_energies=(-0.7, 0.31, 1.3)):
    """Phases where Delta(E, .) is maximal and minimal, with checks.

    Returns
    -------
    theta_max, theta_min : float
    report : dict
        Relative off-harmonic energy and amplitude at frequency q.
    """
    pq = as_fraction(pq)
    q = pq.denominator
    coef, n = theta_harmonics(check_energies[0], lam, pq)
    cq = coef[q % n]
    amp = 2 * abs(cq)
    if amp == 0:
        raise ArithmeticError("no theta dependence in the discriminant")
    theta_max = (-np.angle(cq) / (2 * np.pi * q)) % (1.0 / q)
    theta_min = (theta_max + 0.5 / q) % 1.0
    # re-verify extremality on a 4q-point grid at a few energies
    grid = np.arange(4 * q) / (4 * q)
    worst = 0.0
    for E in check_energies:
        vals = discriminant(np.full(grid.size, E), grid, lam, pq)
        hi = discriminant(E, theta_max, lam, pq)
        lo = discriminant(E, theta_min, lam, pq)
        scale = max(1.0, np.max(np.abs(vals)))
        worst = max(worst, (vals.max() - hi) / scale, (lo - vals.min()) / scale)
    if worst > 1e-9:
        raise ArithmeticError(f"extremal theta check failed (excess {worst:.3g})")
    mask = np.ones(n, dtype=bool)
    mask[[0, q % n, (-q) % n]] = False
    rel = float(np.sum(np.abs(coef[mask]) ** 2) / np.sum(np.abs(coef) ** 2))
    return float(theta_max), float(theta_min), {"off_harmonic_energy": rel,
                                                "amplitude": float(amp)}


def floquet_matrix(theta, lam, pq, sign):
    """q x q Bloch matrix with periodic (sign=+1) or antiperiodic (-1) ends."""
    pq = as_fraction(pq)
    q = pq.denominator
    v = 2 * lam * np.cos(2 * np.pi * rational_phases(theta, pq))
    H = np.diag(v)
    if q == 1:
        H[0, 0] += 2 * sign
        return H
    idx = np.arange(q - 1)
    H[idx, idx + 1] = 1.0
    H[idx + 1, idx] = 1.0
    H[0, q - 1] += sign
    H[q - 1, 0] += sign
    return H


@dataclass
class Band:
    lo: float
    hi: float
    index: int
    edge_residuals: tuple = (0.0, 0.0)
    degenerate: bool = False

    @property
    def length(self):
        return self.hi - self.lo


@dataclass
class GapReport:
    lo: float
    hi: float
    j: int
    q: int
    label: int
    open: bool
    ids_check: float | None = None

    @property
    def length(self):
        return max(self.hi - self.lo, 0.0)

    @property
    def ids_value(self):
        return Fraction(self.j, self.q)


@dataclass
class Spectrum:
    lam: float
    p: int
    q: int
    bands: list
    gaps: list = field(default_factory=list)
    tol: float = 1e-12

    def intervals(self):
        return [(b.lo, b.hi) for b in self.bands]

    def to_json(self):
        return {
            "lambda": self.lam, "p": self.p, "q": self.q,
            "bands": [{"lo": b.lo, "hi": b.hi} for b in self.bands],
            "gaps": [{"lo": g.lo, "hi": g.hi, "ids": f"{g.j}/{g.q}",
                      "label": g.label, "open": g.open} for g in self.gaps],
        }

    @classmethod
    def from_json(cls, obj):
        bands = [Band(b["lo"], b["hi"], i + 1) for i, b in enumerate(obj["bands"])]
        gaps = []
        for g in obj.get("gaps", []):
            j, q = (int(s) for s in g["ids"].split("/"))
            gaps.append(GapReport(g["lo"], g["hi"], j, q, g["label"], g["open"]))
        return cls(obj["lambda"], obj["p"], obj["q"], bands, gaps)


def _refine_root(f, e0, tol, scale):
    """Bisection for f = 0 near e0; returns (root, bracketed)."""
    f0 = f(e0)
    if f0 == 0:
        return e0, True
    h = max(tol, 1e-13 * scale)
    for _ in range(60):
        lo, hi = e0 - h, e0 + h
        flo, fhi = f(lo), f(hi)
        if np.sign(flo) != np.sign(f0):
            a, b, fa = lo, e0, flo
            break
        if np.sign(fhi) != np.sign(f0):
            a, b, fa = e0, hi, f0
            break
        h *= 4
        if h > 1e-3 * scale:
            return e0, False
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0:
            return m, True
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b), True


def spectrum_rational(lam, pq, tol=1e-12):
    """Bands of the almost Mathieu operator at alpha = p/q, union over theta.

    Parameters
    ----------
    lam : float
        Coupling (nonzero).
    pq : Fraction
        Rational frequency with gcd(p, q) = 1.
    tol : float
        Energy tolerance of the edge bisection.

    Returns
    -------
    Spectrum
        q sorted bands; gaps are filled by :func:`gap_labels`.
    """
    pq = as_fraction(pq)
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    p, q = pq.numerator % pq.denominator, pq.denominator
    if math.gcd(p, q) != 1:
        raise ValueError("p and q must be coprime")
    th_max, th_min, _ = extremal_thetas(lam, pq)
    scale = 2 + 2 * abs(lam)
    # edges: Delta(., theta_min) = 2 and Delta(., theta_max) = -2
    cands = []
    for e in eigvalsh(floquet_matrix(th_min, lam, pq, +1)):
        cands.append((e, th_min, 2.0))
    for e in eigvalsh(floquet_matrix(th_max, lam, pq, -1)):
        cands.append((e, th_max, -2.0))
    edges = []
    for e, th, target in cands:
        f = lambda E, th=th, target=target: discriminant(E, th, lam, pq) - target
        root, ok = _refine_root(f, float(e), tol, scale)
        edges.append((root, th, target, ok))
    edges.sort(key=lambda t: t[0])
    bands = []
    for j in range(q):
        lo, hi = edges[2 * j], edges[2 * j + 1]
        res = (abs(discriminant(lo[0], lo[1], lam, pq)) - 2,
               abs(discriminant(hi[0], hi[1], lam, pq)) - 2)
        degenerate = (hi[0] - lo[0]) <= tol
        bands.append(Band(lo[0], max(hi[0], lo[0]), j + 1, res, degenerate))
    return Spectrum(float(lam), p, q, bands, [], tol)


def gap_label(j, p, q):
    """Integer l with l p = j (mod q), |l| <= q/2, ties to positive l."""
    if q == 1:
        return 0
    r = (j * pow(p, -1, q)) % q
    if 2 * r > q:
        r -= q
    return r


def gap_labels(spec, M=400, theta_grid=8, check=True):
    """Fill ``spec.gaps`` with IDS values j/q and labels.

    When ``check`` is set, the IDS at each gap midpoint is recomputed with
    :func:`ids_sturm` and must agree with j/q within 2/M + 1e-3.
    """
    pq = Fraction(spec.p, spec.q)
    gaps = []
    for j in range(1, spec.q):
        lo, hi = spec.bands[j - 1].hi, spec.bands[j].lo
        g = GapReport(lo, max(hi, lo), j, spec.q, gap_label(j, spec.p, spec.q),
                      (hi - lo) > 10 * spec.tol)
        if check:
            n = ids_sturm(0.5 * (lo + hi), spec.lam, pq, theta_grid, M)
            g.ids_check = float(n)
            if abs(n - j / spec.q) > 2.0 / M + 1e-3:
                raise AssertionError(f"gap {j}: Sturm IDS {n} differs from {j}/{spec.q}")
        gaps.append(g)
    spec.gaps = gaps
    return spec


def _diagonal(lam, alpha, theta, M):
    """Potential 2 lam cos 2pi(theta + k alpha) for k = -M..M, theta an array."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if isinstance(alpha, Fraction):
        p, q = alpha.numerator, alpha.denominator
        ks = np.arange(-M, M + 1)
        offs = np.mod(ks * p, q) / q
    else:
        offs = orbit_offsets(alpha, 2 * M + 1)
        shift = offs[M]
        offs = np.mod(offs - shift, 1.0)
    return 2 * lam * np.cos(2 * np.pi * (theta[:, None] + offs[None, :]))


def sturm_count(diag, off, E):
    """Number of eigenvalues < E of symmetric tridiagonal matrices.

    Parameters
    ----------
    diag : array (..., n)
        Diagonals (leading axes broadcast against ``E``).
    off : float or array (n-1,)
        Off-diagonal entries.
    E : array
        Energies, broadcast against ``diag[..., 0]``.
    """
    diag = np.asarray(diag, dtype=float)
    n = diag.shape[-1]
    off = np.broadcast_to(np.asarray(off, dtype=float), (max(n - 1, 0),))
    E = np.asarray(E, dtype=float)
    tiny = 1e-300
    u = diag[..., 0] - E
    u = np.where(u == 0, -tiny, u)
    count = (u < 0).astype(np.int64)
    for i in range(1, n):
        u = diag[..., i] - E - off[i - 1] ** 2 / u
        u = np.where(u == 0, -tiny, u)
        count += u < 0
    return count


def ids_sturm(E, lam, alpha, theta_grid=16, M=400):
    """IDS estimate from eigenvalue counts of (2M+1)-site truncations.

    Counts eigenvalues below E with Sturm sequences (Dirichlet ends),
    divides by 2M+1 and averages over ``theta_grid`` equally spaced phases.
    The truncation error is O(1/M).
    """
    E_arr = np.atleast_1d(np.asarray(E, dtype=float))
    thetas = (np.arange(theta_grid) + 0.5) / theta_grid
    diag = _diagonal(lam, alpha, thetas, M)
    counts = sturm_count(diag[:, None, :], 1.0, E_arr[None, :])
    out = counts.mean(axis=0) / (2 * M + 1)
    return out if np.ndim(E) else float(out[0])


def _intervals(S):
    if isinstance(S, Spectrum):
        iv = S.intervals()
    else:
        iv = [(float(a), float(b)) for a, b in S]
    if not iv:
        raise ValueError("empty set")
    iv.sort()
    merged = [list(iv[0])]
    for a, b in iv[1:]:
        if a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [tuple(m) for m in merged]


def _directed(A, B):
    """sup over a in A of dist(a, B), both merged sorted interval lists."""
    bl = np.array([b[0] for b in B])
    bh = np.array([b[1] for b in B])

    def dist(x):
        inside = (bl <= x) & (x <= bh)
        if inside.any():
            return 0.0
        return float(np.min(np.minimum(np.abs(bl - x), np.abs(bh - x))))

    pts = []
    for a0, a1 in A:
        pts += [a0, a1]
        # midpoints of gaps of B inside [a0, a1]
        for i in range(len(B) - 1):
            m = 0.5 * (B[i][1] + B[i + 1][0])
            if a0 <= m <= a1:
                pts.append(m)
    return max(dist(x) for x in pts)


def hausdorff_distance(S1, S2):
    """Exact Hausdorff distance between two finite unions of intervals."""
    A, B = _intervals(S1), _intervals(S2)
    return max(_directed(A, B), _directed(B, A))


def lebesgue_measure(S):
    if isinstance(S, Spectrum):
        iv = S.intervals()
    else:
        iv = list(S)
    if not iv:
        return 0.0
    return float(sum(b - a for a, b in _intervals(iv)))


def scaled(S, factor):
    """Intervals of factor * S."""
    out = []
    for a, b in _intervals(S):
        x, y = factor * a, factor * b
        out.append((min(x, y), max(x, y)))
    return out


def band_samples(spec, n, seed=0, margin=0.1):
    """n energies inside the bands, drawn with weight proportional to length."""
    rng = np.random.default_rng(seed)
    lens = np.array([b.length for b in spec.bands])
    picks = rng.choice(len(lens), size=n, p=lens / lens.sum())
    u = rng.uniform(margin, 1 - margin, size=n)
    return np.array([spec.bands[i].lo + u[k] * spec.bands[i].length
                     for k, i in enumerate(picks)])


def butterfly(qmax, lam=1.0, tol=1e-10):
    """Rows (p, q, band index, lo, hi) for all reduced p/q in [0, 1), q <= qmax."""
    rows = []
    for q in range(1, qmax + 1):
        for p in range(q):
            if math.gcd(p, q) != 1:
                continue
            spec = spectrum_rational(lam, Fraction(p, q), tol)
            for b in spec.bands:
                rows.append((p, q, b.index, b.lo, b.hi))
    return rows


def is_rational(alpha):
    return isinstance(alpha, Fraction) or (
        isinstance(alpha, IrrationalFrequency) and alpha.rational is not None)


def approximant(alpha, q_max):
    """Deepest convergent p_n/q_n of alpha with q_n <= q_max."""
    if isinstance(alpha, Fraction):
        return alpha
    best = Fraction(0, 1)
    for p, q in alpha.convergents:
        if q <= q_max:
            best = Fraction(p, q)
    return best


__all__ = [
    "Band", "GapReport", "Spectrum", "discriminant", "theta_harmonics",
    "extremal_thetas", "spectrum_rational", "gap_labels", "gap_label",
    "ids_sturm", "sturm_count", "hausdorff_distance", "lebesgue_measure",
    "scaled", "band_samples", "butterfly", "approximant", "alpha_float",
]


def holder_scan(alpha, q_max=55, lam=1.0, q_min=2):
    """Hausdorff distances between spectra at consecutive convergents of alpha.

    Returns
    -------
    rows : list of (p1/q1, p2/q2, |alpha1 - alpha2|, distance)
    exponent : float
        Least-squares slope of log distance against log |alpha1 - alpha2|.
    """
    if isinstance(alpha, Fraction):
        raise ValueError("holder_scan needs an irrational frequency")
    cv = [Fraction(p, q) for p, q in alpha.convergents if q_min <= q <= q_max]
    if len(cv) < 3:
        raise ValueError("need at least three convergents in range")
    specs = [spectrum_rational(lam, a) for a in cv]
    rows = []
    for (a1, s1), (a2, s2) in zip(zip(cv, specs), zip(cv[1:], specs[1:])):
        rows.append((a1, a2, abs(float(a1 - a2)), hausdorff_distance(s1, s2)))
    x = np.log([r[2] for r in rows])
    y = np.log([max(r[3], 1e-300) for r in rows])
    return rows, float(np.polyfit(x, y, 1)[0])
