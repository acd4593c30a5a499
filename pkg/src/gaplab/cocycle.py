"""Transfer-matrix cocycles of the almost Mathieu operator.

The Schrodinger matrix is S(x) = [[E - 2 lam cos 2pi x, -1], [1, 0]] and
A_n(x) = S(x + (n-1) alpha) ... S(x). Products are kept as a unit matrix
times exp(log_mag), rescaled at every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .frequency import IrrationalFrequency, alpha_float, orbit_offsets
from .trig import TrigMat, det2, inv2


@dataclass(frozen=True)
class CocycleSpec:
    """(alpha, S_{lam,E}) with optional complexified phase x + i*eps."""

    lam: float
    E: float
    alpha: object
    eps: float = 0.0


@dataclass
class ScaledProduct:
    """Represents exp(log_mag) * unit."""

    unit: np.ndarray
    log_mag: float

    @property
    def matrix(self):
        return np.exp(self.log_mag) * self.unit

    def det(self):
        return det2(self.unit) * np.exp(2 * self.log_mag)

    def log_norm(self):
        return self.log_mag + float(np.log(_opnorm(self.unit)))


@lru_cache(maxsize=32)
def _offsets_cached(alpha, n):
    return orbit_offsets(alpha, n)


def offsets(alpha, n):
    """frac(k alpha), k = 0..n-1 (cached per frequency)."""
    try:
        return _offsets_cached(alpha, int(n))
    except TypeError:
        return orbit_offsets(alpha, int(n))


def _opnorm(a, b=None, c=None, d=None):
    """Spectral norm of 2x2 matrices given as an array (..., 2, 2) or entries."""
    if b is None:
        M = np.asarray(a)
        a, b, c, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 0], M[..., 1, 1]
    s = np.abs(a) ** 2 + np.abs(b) ** 2 + np.abs(c) ** 2 + np.abs(d) ** 2
    dt = np.abs(a * d - b * c)
    disc = np.sqrt(np.maximum(s * s - 4 * dt * dt, 0.0))
    return np.sqrt(0.5 * (s + disc))


def _potential(lam, x, eps):
    z = 2 * np.pi * x
    if eps == 0:
        return 2 * lam * np.cos(z)
    return 2 * lam * (np.cos(z) * np.cosh(2 * np.pi * eps)
                      - 1j * np.sin(z) * np.sinh(2 * np.pi * eps))


def transfer_batch(lam, E, x, alpha, n, eps=0.0, track=None):
    """A_n(x) for arrays of energies and phases.

    Parameters
    ----------
    E : array (nE,)
    x : array (nx,)
        Real parts of the phases.
    n : int
    eps : float
        Imaginary part of the phases.
    track : callable, optional
        Called as ``track(k, a, b, c, d)`` after step k (k = 1..n).

    Returns
    -------
    unit : array (nE, nx, 2, 2)
    log_mag : array (nE, nx)
    """
    E = np.atleast_1d(np.asarray(E, dtype=float))[:, None]
    x = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    dtype = complex if eps != 0 else float
    shape = np.broadcast(E, x).shape
    a = np.ones(shape, dtype)
    b = np.zeros(shape, dtype)
    c = np.zeros(shape, dtype)
    d = np.ones(shape, dtype)
    logm = np.zeros(shape)
    off = offsets(alpha, n)
    for k in range(n):
        t = E - _potential(lam, x + off[k], eps)
        a, b, c, d = t * a - c, t * b - d, a, b
        s = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.maximum(np.abs(c), np.abs(d)))
        a, b, c, d = a / s, b / s, c / s, d / s
        logm += np.log(s)
        if track is not None:
            track(k + 1, a, b, c, d)
    unit = np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)
    return unit, logm


def transfer_product(spec, x, n):
    """Scaled ordered product A_n(x) for a single phase."""
    if n < 1:
        raise ValueError("n must be >= 1")
    unit, logm = transfer_batch(spec.lam, [spec.E], [x], spec.alpha, n, spec.eps)
    return ScaledProduct(unit[0, 0], float(logm[0, 0]))


def phase_samples(n, seed=0):
    """Stratified phases (j + u)/n with a seeded offset u."""
    u = np.random.default_rng(seed).uniform()
    return (np.arange(n) + u) / n


def log_norms(lam, E, x, alpha, n, eps=0.0):
    """(1/n) log ||A_n(x)|| for arrays E (nE,) and x (nx,)."""
    unit, logm = transfer_batch(lam, E, x, alpha, n, eps)
    return (logm + np.log(_opnorm(unit))) / n


@dataclass
class LyapunovEstimate:
    mean: float
    max: float
    min: float
    samples: np.ndarray = field(repr=False)

    @property
    def spread(self):
        return self.max - self.min


def lyapunov(spec, n_iters=100_000, n_phase_samples=8, seed=0):
    """Lyapunov exponent estimate from (1/n) log ||A_n(x)|| over phases.

    Returns the phase average (the estimator) and the max over phases.
    """
    return lyapunov_batch(spec.lam, [spec.E], spec.alpha, n_iters, n_phase_samples,
                          seed, spec.eps)[0]


def lyapunov_batch(lam, energies, alpha, n_iters=100_000, n_phase_samples=8, seed=0,
                   eps=0.0):
    """Vectorised :func:`lyapunov` over many energies (same phases for all)."""
    if n_iters < 1000:
        raise ValueError("n_iters must be >= 1000")
    x = phase_samples(n_phase_samples, seed)
    vals = log_norms(lam, energies, x, alpha, n_iters, eps)
    out = []
    for row in vals:
        srt = np.sort(row)
        out.append(LyapunovEstimate(float(_pairwise_mean(srt)), float(row.max()),
                                    float(row.min()), row))
    return out


def _pairwise_mean(v):
    # exactly rounded sum: independent of ordering and of thread count
    return math.fsum(v) / len(v) if len(v) else 0.0


def lifted_advance(a, b, c, d, v1, v2):
    """Lifted angle advance of v under M = [[a, b], [c, d]] (det > 0).

    M = R_phi P with P symmetric positive, phi = atan2(c - b, a + d); P turns
    any vector by less than pi/2, which fixes the branch.
    """
    w1, w2 = a * v1 + b * v2, c * v1 + d * v2
    phi = np.arctan2(c - b, a + d)
    turn = np.arctan2(v1 * w2 - v2 * w1, v1 * w1 + v2 * w2)
    delta = np.mod(turn - phi + np.pi, 2 * np.pi) - np.pi
    nrm = np.hypot(w1, w2)
    return phi + delta, w1 / nrm, w2 / nrm


def _rotation_raw(lam, E, x0, phi0, alpha, n):
    """Average lifted advance (in turns) for arrays of starts."""
    E = np.asarray(E, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    psi = np.zeros(np.broadcast(E, x0, phi0).shape)
    v1 = np.cos(2 * np.pi * phi0) + psi
    v2 = np.sin(2 * np.pi * phi0) + psi
    off = offsets(alpha, n)
    total = np.zeros_like(psi)
    for k in range(n):
        t = E - 2 * lam * np.cos(2 * np.pi * (x0 + off[k]))
        adv, v1, v2 = lifted_advance(t, -1.0, 1.0, 0.0, v1, v2)
        total += adv
    return total / (2 * np.pi * n)


class RotationSpreadError(ArithmeticError):
    pass


def _is_rational(alpha):
    return isinstance(alpha, Fraction) or (
        isinstance(alpha, IrrationalFrequency) and alpha.rational is not None)


def _period(alpha):
    if isinstance(alpha, Fraction):
        return alpha.denominator
    return alpha.rational.denominator


def rotation_number(spec, n_iters=100_000, x0=None, phi0=0.0, n_starts=4, tol=None,
                    check=True):
    """Fibered rotation number rho in [0, 1/2] of (alpha, S_{lam,E}).

    For irrational alpha the starts (x0, phi0) are spread out and their
    estimates must agree within ``tol`` (default 5/n_iters). For rational
    alpha the rotation number depends on the phase inside bands, so the
    value is averaged over 16 phases covering one period 1/q and only
    the phi0 dependence is checked.
    """
    return rotation_numbers(spec.lam, [spec.E], spec.alpha, n_iters, x0, phi0,
                            n_starts, tol, check)[0]


def rotation_numbers(lam, energies, alpha, n_iters=100_000, x0=None, phi0=0.0,
                     n_starts=4, tol=None, check=True):
    """Vectorised :func:`rotation_number` over energies."""
    tol = 5.0 / n_iters if tol is None else tol
    E = np.atleast_1d(np.asarray(energies, dtype=float))
    x0 = 0.1234 if x0 is None else x0
    if _is_rational(alpha):
        q = _period(alpha)
        n_x = 16
        xs = x0 + (np.arange(n_x) + 0.5) / (n_x * q)
        phis = phi0 + np.array([0.0, 0.25])
        X = np.repeat(xs, 2)
        P = np.tile(phis, n_x)
        raw = _rotation_raw(lam, E[:, None], X[None, :], P[None, :], alpha, n_iters)
        raw = raw.reshape(E.size, n_x, 2)
        spread = np.max(np.abs(raw[..., 0] - raw[..., 1]), axis=1)
        rho = raw.mean(axis=(1, 2))
    else:
        j = np.arange(n_starts)
        X = x0 + j / n_starts + 0.0371 * j
        P = phi0 + j / (2 * n_starts)
        raw = _rotation_raw(lam, E[:, None], X[None, :], P[None, :], alpha, n_iters)
        spread = raw.max(axis=1) - raw.min(axis=1)
        rho = raw.mean(axis=1)
    if check and np.any(spread > tol):
        i = int(np.argmax(spread))
        raise RotationSpreadError(
            f"rotation number starts disagree at E={E[i]:.6g}: spread {spread[i]:.3g} > {tol:.3g}")
    return np.clip(rho, 0.0, 0.5)


def ids_from_rotation(rho):
    """N = 1 - 2 rho."""
    return 1.0 - 2.0 * np.asarray(rho) if np.ndim(rho) else 1.0 - 2.0 * rho


def rotation_number_general(A, alpha, n_iters=20_000, x0=0.1234, phi0=0.0):
    """Rotation number (in turns, not reduced) of a general real cocycle.

    Parameters
    ----------
    A : callable
        ``A(x)`` returns an array (len(x), 2, 2) of real matrices with det > 0.
    """
    a_val = alpha_float(alpha)
    period = getattr(A, "period", 1)
    xs = np.mod(x0 + np.arange(n_iters) * a_val, period)
    mats = np.real(A(xs))
    v1, v2 = np.cos(2 * np.pi * phi0), np.sin(2 * np.pi * phi0)
    total = 0.0
    for k in range(n_iters):
        M = mats[k]
        adv, v1, v2 = lifted_advance(M[0, 0], M[0, 1], M[1, 0], M[1, 1], v1, v2)
        total += adv
    return total / (2 * np.pi * n_iters)


@dataclass
class HyperbolicityReport:
    verdict: object  # True, False or "inconclusive"
    growth_rate: float
    growth_ok: bool
    cone_ok: bool
    cone_variation: float


def uniform_hyperbolicity_test(spec, n=20_000, gamma_floor=None, n_grid=64):
    """Uniform hyperbolicity test for (alpha, S_{lam,E}).

    Growth: min over a phase grid of (1/n) log ||A_n(x)|| against
    log(gamma_floor). Cone: the most expanded direction of A_k(x) must settle
    (total angular variation over the second half of the run below 0.1 rad).
    """
    return uniform_hyperbolicity_batch(spec.lam, [spec.E], spec.alpha, n, gamma_floor,
                                       n_grid)[0]


def uniform_hyperbolicity_batch(lam, energies, alpha, n=20_000, gamma_floor=None,
                                n_grid=64, band=0.1):
    log_floor = max(1e-4, 20.0 / n) if gamma_floor is None else float(np.log(gamma_floor))
    E = np.atleast_1d(np.asarray(energies, dtype=float))
    x = (np.arange(n_grid) + 0.5) / n_grid
    state = {"prev": None, "var": np.zeros((E.size, n_grid))}
    half = n // 2

    def track(k, a, b, c, d):
        if k < half:
            return
        # right singular direction of the unit matrix (mod pi)
        ang = 0.5 * np.arctan2(2 * (a * b + c * d), (a * a + c * c) - (b * b + d * d))
        if state["prev"] is not None:
            dif = np.mod(ang - state["prev"] + np.pi / 2, np.pi) - np.pi / 2
            state["var"] += np.abs(dif)
        state["prev"] = ang

    unit, logm = transfer_batch(lam, E, x, alpha, n, 0.0, track)
    rates = (logm + np.log(_opnorm(unit))) / n
    out = []
    for i in range(E.size):
        growth = float(rates[i].min())
        var = float(state["var"][i].max())
        g_ok = growth >= log_floor
        c_ok = var <= band
        if g_ok and c_ok:
            verdict = True
        elif g_ok:
            verdict = "inconclusive"
        else:
            verdict = False
        out.append(HyperbolicityReport(verdict, growth, g_ok, c_ok, var))
    return out


def transfer_bound_check(lam, energies, alpha, k, eta=None, n_real=16, n_imag=4):
    """max over complex phases |Im x| <= eta of (1/k) log ||A_k(x)||.

    Uses n_real * n_imag phases; by default eta = -ln|lam|/(2 pi).
    """
    eta = -np.log(abs(lam)) / (2 * np.pi) if eta is None else eta
    x = (np.arange(n_real) + 0.5) / n_real
    best = np.full(len(np.atleast_1d(energies)), -np.inf)
    for e in np.linspace(-eta, eta, n_imag):
        vals = log_norms(lam, energies, x, alpha, k, float(e))
        best = np.maximum(best, vals.max(axis=1))
    return best


# ----------------------------------------------------------------------------
# conjugation and degree

def amo_matrix(lam, E):
    """Callable x -> S_{lam,E}(x) on arrays (values of shape (len(x), 2, 2))."""

    def A(x):
        x = np.asarray(x)
        out = np.zeros(x.shape + (2, 2))
        out[..., 0, 0] = E - 2 * lam * np.cos(2 * np.pi * x)
        out[..., 0, 1] = -1.0
        out[..., 1, 0] = 1.0
        return out

    A.period = 1
    A.degree = 1
    return A


def conjugate_cocycle(B, A, alpha, n_grid=None, N_out=None, cond_max=1e8, max_grid=2 ** 16):
    """x -> B(x+alpha)^{-1} A(x) B(x) as a TrigMat.

    ``A`` is a TrigMat or a callable returning (n, 2, 2) arrays with
    attributes ``period`` and ``degree`` (essential degree).
    """
    a = alpha_float(alpha)
    period = B.period
    degA = A.N if isinstance(A, TrigMat) else getattr(A, "degree", 8)
    if isinstance(A, TrigMat) and A.period == 2:
        period = 2
    # in units of the R/(period Z) lattice
    deg = 2 * B.N + degA * (period if (not isinstance(A, TrigMat) or A.period == 1) else 1)
    n = n_grid or int(max(64, 2 ** np.ceil(np.log2(4 * (2 * deg + 1)))))
    while True:
        x = period * np.arange(n) / n
        Bx = B.grid(n)
        Bs = B.shift(a).grid(n)
        Ax = A.grid(n) if isinstance(A, TrigMat) else A(x)
        if np.isrealobj(Ax) and B.is_real():
            Bx, Bs = Bx.real, Bs.real
        dets = det2(Bs)
        cond = _opnorm(Bs) ** 2 / np.maximum(np.abs(dets), 1e-300)
        if np.max(cond) > cond_max:
            raise ArithmeticError(f"conjugator nearly singular (condition {np.max(cond):.3g})")
        vals = inv2(Bs) @ Ax @ Bx
        # a non-unimodular B makes the result an infinite series: refine the
        # grid until the upper quarter of the spectrum is negligible
        if n_grid or n >= max_grid or np.ptp(np.abs(dets)) < 1e-13:
            break
        F = np.abs(np.fft.fft(vals, axis=0))
        tail = F[n // 4: n - n // 4 + 1].max()
        if tail <= 1e-16 * max(F.max(), 1e-300) * n:
            break
        n *= 2
    N_out = N_out or (n // 2 - 1)
    out = TrigMat.from_grid(vals, period, min(N_out, n // 2 - 1))
    return out


def winding_angle(w1, w2):
    """Winding number of (w1, w2) along a closed sampled loop."""
    ang = np.arctan2(w2, w1)
    steps = np.diff(np.append(ang, ang[0]))
    tot = np.sum(np.mod(steps + np.pi, 2 * np.pi) - np.pi) / (2 * np.pi)
    return int(np.round(tot)), float(tot)


def degree(B, n_grid=None, min_norm=1e-8, coeff_floor=1e-13):
    """Degree over R/2Z of the first column of B, computed two ways.

    1. angle accumulation of (B11, B21) on a fine grid over [0, 2);
    2. zero count in the unit disk of the polynomial
       f(z) = z^K sum_k (c1_k + i c2_k) z^k, minus K.
    """
    col = B.coeffs[:, 0, :]
    N = B.N
    n = n_grid or max(16 * (2 * N + 1), 512)
    x = 2.0 * np.arange(n) / n
    vals = B(x)[:, :, 0]
    if not (np.allclose(vals.imag, 0, atol=1e-9 * max(1, np.abs(vals).max()))):
        raise ValueError("degree needs a real column")
    w1, w2 = vals[:, 0].real, vals[:, 1].real
    if np.min(np.hypot(w1, w2)) < min_norm:
        raise ArithmeticError("first column nearly vanishes on the real axis")
    d_angle, _ = winding_angle(w1, w2)
    # lattice index in units of exp(pi i x): period 1 doubles every index
    g = col[0] + 1j * col[1]
    ks = B.ks * (2 if B.period == 1 else 1)
    keep = np.abs(g) > coeff_floor * np.abs(g).max()
    ks, g = ks[keep], g[keep]
    K = -ks.min()
    poly = np.zeros(ks.max() + K + 1, dtype=complex)
    poly[ks + K] = g
    roots = np.roots(poly[::-1])
    if roots.size and np.min(np.abs(np.abs(roots) - 1)) < 1e-6:
        raise ArithmeticError("polynomial has zeros on the unit circle")
    d_roots = int(np.sum(np.abs(roots) < 1)) - int(K)
    if d_roots != d_angle:
        raise ArithmeticError(f"degree methods disagree: angle {d_angle}, zeros {d_roots}")
    return d_angle
