"""Reducibility toolkit: Bloch vectors, analytic conjugacies, homological
equations, one KAM step and the first-order gap-edge certificate.

Conventions
-----------
A(x) = S_{lam,E}(x) = [[E - 2 lam cos 2pi x, -1], [1, 0]] over x -> x + alpha.
B reduces A to C when B(x + alpha)^{-1} A(x) B(x) = C(x).
Series on R/2Z live on the lattice exp(pi i k x) (see :mod:`gaplab.trig`).
rot(t) = [[cos 2pi t, -sin 2pi t], [sin 2pi t, cos 2pi t]].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .config import DEFAULT
from .cocycle import amo_matrix, conjugate_cocycle, degree, rotation_numbers
from .frequency import alpha_float
from .localization import DualEigenpair, dual_eigenpairs, dual_operator, phases
from .spectrum import as_fraction, discriminant, extremal_thetas
from .trig import TrigMat, TrigSeries, det2, expm2, inv2, rot

E11 = np.array([[1.0, 0.0], [0.0, 0.0]])


class SmallDivisorError(ArithmeticError):
    """A homological divisor fell below the floor."""

    def __init__(self, ks, floor):
        self.ks = list(ks)
        super().__init__(f"|exp(2 pi i k alpha) - 1| < {floor:g} for k = {self.ks[:10]}")


class PipelineError(ArithmeticError):
    """A reduction stage exceeded its tolerance; ``ledger`` holds the records so far."""

    def __init__(self, msg, ledger):
        self.ledger = ledger
        super().__init__(msg)


def _grid_size(N, factor=4):
    return int(max(64, 2 ** math.ceil(math.log2(factor * (2 * N + 1)))))


def _sup(vals):
    vals = np.asarray(vals)
    if vals.ndim == 3:
        return float(np.max(np.linalg.norm(vals, ord=2, axis=(1, 2))))
    return float(np.max(np.abs(vals)))


def _const_callable(M):
    M = np.asarray(M, dtype=float)

    def f(x):
        return np.broadcast_to(M, np.shape(x) + (2, 2)).copy()

    f.period = 1
    f.degree = 0
    return f


@dataclass(frozen=True)
class ParabolicForm:
    """Constant normal form [[s, a], [0, s]], s = +1 or -1."""

    sign: int
    a: float

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @property
    def matrix(self):
        return np.array([[self.sign, self.a], [0.0, self.sign]], dtype=float)

    def to_json(self):
        return {"sign": self.sign, "a": self.a}


# ----------------------------------------------------------------------------
# lattice helpers

def to_period2(M):
    """Re-index a period-1 series on the R/2Z lattice (k -> 2k)."""
    if M.period == 2:
        return M
    c = M.coeffs
    out = np.zeros(c.shape[:-1] + (4 * M.N + 1,), dtype=complex)
    out[..., ::2] = c
    return type(M)(out, 2)


def to_period1(M, tol=1e-12):
    """Inverse of :func:`to_period2`; raises when odd modes are present."""
    if M.period == 1:
        return M
    c = M.coeffs
    odd = c[..., (M.N + 1) % 2::2]
    if np.max(np.abs(odd), initial=0.0) > tol * max(np.max(np.abs(c)), 1e-300):
        raise ValueError("series has odd modes on R/2Z")
    return type(M)(c[..., M.N % 2::2].copy(), 1)


def modulate(M, k):
    """Multiply by exp(pi i k x); the result lives on R/2Z."""
    M = to_period2(M)
    N = M.N + abs(k)
    P = M.padded(N)
    return type(M)(np.roll(P.coeffs, k, axis=-1), 2)


def parity_class(M, tol=1e-13):
    """'even', 'odd' or 'mixed' support of an R/2Z series."""
    if M.period == 1:
        return "even"
    a = np.abs(M.coeffs)
    a = a.reshape(-1, a.shape[-1]).max(axis=0)
    scale = max(a.max(), 1e-300)
    ks = np.arange(-M.N, M.N + 1)
    ev = a[ks % 2 == 0].max(initial=0.0) > tol * scale
    od = a[ks % 2 == 1].max(initial=0.0) > tol * scale
    return "mixed" if ev and od else ("odd" if od else "even")


# ----------------------------------------------------------------------------
# Bloch vector

@dataclass
class BlochVector:
    """U(x) = (e^{2 pi i theta} u(x), u(x - alpha)) from a dual eigenvector.

    ``g`` is the truncation defect: A U = e^{2 pi i theta} (U(x+alpha) + (g, 0)).
    """

    U: TrigMat
    g: TrigSeries
    theta: float
    E: float
    lam: float
    window: tuple
    defect_sites: list
    identity_residual: float


def bloch_vector(pair, I=None, alpha=None, tol=1e-10):
    """Bloch vector of a dual eigenpair restricted to ``I = (x1, x2)``.

    The defect ``g`` is supported on {x1 - 1, x1, x2, x2 + 1}; the vector
    identity is checked on a grid and must hold to ``tol`` (relative).
    """
    alpha = alpha if alpha is not None else pair.alpha
    x1, x2 = I if I is not None else pair.window
    if not (pair.lo <= x1 <= x2 <= pair.hi):
        raise ValueError("I must lie inside the eigenvector window")
    a = alpha_float(alpha)
    N = max(abs(x1), abs(x2)) + 1
    u = np.zeros(2 * N + 1, dtype=complex)
    ks = np.arange(x1, x2 + 1)
    u[ks + N] = pair.coeffs[ks - pair.lo]
    kk = np.arange(-N, N + 1)
    th = pair.theta
    d = 2 * np.cos(2 * np.pi * phases(alpha, th, -N, N))
    g = (pair.E - d) * u
    g[1:] -= pair.lam * u[:-1]
    g[:-1] -= pair.lam * u[1:]
    # (E - d) u vanishes off I; the neighbour sums leak to x1 - 1 and x2 + 1
    scale = np.max(np.abs(u))
    sites = sorted({x1 - 1, x1, x2, x2 + 1})
    inner = np.abs(g[np.isin(kk, sites, invert=True)])
    if inner.size and inner.max() > tol * scale:
        raise ArithmeticError(f"defect off the four boundary modes: {inner.max():.3g}")
    ph = np.exp(2j * np.pi * th)
    coeffs = np.zeros((2, 1, 2 * N + 1), dtype=complex)
    coeffs[0, 0] = ph * u
    coeffs[1, 0] = u * np.exp(-2j * np.pi * kk * a)
    U = TrigMat(coeffs, 1)
    G = TrigSeries(g, 1)
    n = _grid_size(N, 4)
    x = np.arange(n) / n
    A = amo_matrix(pair.lam, pair.E)(x)
    lhs = (A @ U(x))[:, :, 0]
    rhs = ph * U(x + a)[:, :, 0]
    rhs[:, 0] += ph * G(x)
    res = _sup(lhs - rhs) / max(1.0, _sup(U(x)[:, :, 0]))
    if res > tol:
        raise ArithmeticError(f"Bloch identity residual {res:.3g} exceeds {tol:g}")
    return BlochVector(U, G, float(th), float(pair.E), float(pair.lam), (x1, x2),
                       sites, float(res))


# ----------------------------------------------------------------------------
# completion and realification

@dataclass
class Completion:
    B: TrigMat
    det_residual: float
    min_norm: float
    grid: int


def complete_to_sl2(W, min_norm_floor=1e-8, det_tol=DEFAULT.det_tol, coeff_tol=1e-17,
                    max_grid=2 ** 18):
    """Complete a real nonvanishing column W to an analytic B = (W | V) in SL(2, R).

    V starts as (-w2, w1) / |W|^2 and is corrected by one Newton step
    V += (1 - det) V0 after spectral truncation.

    Raises
    ------
    ArithmeticError
        When min |W| < ``min_norm_floor`` or det B misses 1 by more than
        ``det_tol``.
    """
    if W.shape != (2, 1):
        raise ValueError("W must be a 2 x 1 column")
    if not W.is_real(1e-10):
        raise ValueError("W must be real")
    W = W.real_part().trim(coeff_tol)
    period = W.period
    n = _grid_size(W.N, 16)
    while True:
        w = W.grid(n)[:, :, 0].real
        nrm2 = np.sum(w * w, axis=1)
        mn = float(np.sqrt(nrm2.min()))
        if mn < min_norm_floor:
            raise ArithmeticError(f"column nearly vanishes (min |W| = {mn:.3g})")
        V0 = np.stack([-w[:, 1], w[:, 0]], axis=1) / nrm2[:, None]
        F = np.abs(np.fft.fft(V0, axis=0)) / n
        tail = F[n // 2 - n // 16:n // 2 + n // 16].max()
        if tail <= 1e-16 * F.max() or n >= max_grid:
            break
        n *= 2
    V = V0.copy()
    for _ in range(3):
        Vt = TrigMat.from_grid(V[:, :, None], period, n // 2 - 1).real_part()
        V = Vt.grid(n)[:, :, 0].real
        err = 1.0 - (w[:, 0] * V[:, 1] - w[:, 1] * V[:, 0])
        if np.max(np.abs(err)) < 1e-15:
            break
        V = V + err[:, None] * V0
    Vt = TrigMat.from_grid(V[:, :, None], period, n // 2 - 1).real_part().trim(1e-15)
    N = max(W.N, Vt.N)
    B = TrigMat(np.concatenate([W.padded(N).coeffs, Vt.padded(N).coeffs], axis=1), period)
    det = B.det_grid(2 * n)
    res = float(np.max(np.abs(det - 1)))
    if res > det_tol:
        raise ArithmeticError(f"det B residual {res:.3g} exceeds {det_tol:g}")
    return Completion(B, res, mn, n)


@dataclass
class Realified:
    """Real frame from a complex Bloch column.

    W(x+alpha)^{-1} A W = rot(angle) with angle = -sign * theta_tilde.
    """

    S: TrigMat
    T: TrigMat
    W: TrigMat
    det_value: float
    det_variation: float
    sign: int
    angle: float
    resonance_distance: float | None = None


def realify(U_tilde, theta_tilde, floor=1e-13, n_j=None, alpha=None):
    """Split U_tilde = S + iT and normalize (S, +-T) to det 1.

    Parameters
    ----------
    U_tilde : TrigMat (2 x 1)
        Column with A U_tilde = e^{2 pi i theta_tilde} U_tilde(x + alpha).
    theta_tilde : float
    floor : float
        Minimal |det(S, T)|; below it the frame has collapsed (resonance).
    n_j, alpha : optional
        When given, the distance ||2 theta_tilde - n_j alpha|| is reported
        alongside det for diagnostics.
    """
    c = U_tilde.coeffs
    cr = np.conj(c[..., ::-1])
    S = TrigMat(0.5 * (c + cr), U_tilde.period)
    T = TrigMat(-0.5j * (c - cr), U_tilde.period)
    n = _grid_size(U_tilde.N, 16)
    s = S.grid(n)[:, :, 0].real
    t = T.grid(n)[:, :, 0].real
    det = s[:, 0] * t[:, 1] - s[:, 1] * t[:, 0]
    m = float(np.mean(det))
    if abs(m) < floor or np.min(np.abs(det)) < floor:
        raise ArithmeticError(f"det(S, T) = {m:.3g}: resonant collapse of the frame")
    sign = 1 if m > 0 else -1
    scale = np.sqrt(np.abs(det))
    Wg = np.stack([s / scale[:, None], sign * t / scale[:, None]], axis=2)
    W = TrigMat.from_grid(Wg, U_tilde.period, n // 2 - 1).real_part().trim(1e-15)
    dist = None
    if n_j is not None and alpha is not None:
        v = 2 * theta_tilde - n_j * alpha_float(alpha)
        dist = float(abs(v - round(v)))
    return Realified(S, T, W, m, float(np.max(np.abs(det - m))), sign,
                     float(-sign * theta_tilde), dist)


def rotation_residual(W, A, alpha, angle, n_grid=None):
    """sup_x || W(x+alpha)^{-1} A(x) W(x) - rot(angle) ||."""
    a = alpha_float(alpha)
    n = n_grid or _grid_size(W.N + 1, 8)
    x = W.period * np.arange(n) / n
    C = inv2(W(x + a).real) @ A(x) @ W(x).real
    return _sup(C - rot(angle))


# ----------------------------------------------------------------------------
# homological equations

@dataclass
class ScalarSolution:
    phi: TrigSeries
    residual: float
    min_divisor: float
    mean: complex
    rel_residual: float = float("nan")
    grid_residual: float = float("nan")


def scalar_homological_solve(kappa, alpha, sign=1, divisor_floor=DEFAULT.divisor_floor):
    """Solve sign * (phi(x + alpha) - phi(x)) = kappa(x) - [kappa], [phi] = 0.

    phi_k = sign * kappa_k / (exp(2 pi i k alpha / P) - 1) on R/(P Z).

    Raises
    ------
    SmallDivisorError
        Listing every k with a nonzero coefficient and |divisor| below the floor.
    """
    a = alpha_float(alpha)
    ks = kappa.ks
    mu = np.exp(2j * np.pi * ks * a / kappa.period)
    div = mu - 1
    nz = ks != 0
    bad = nz & (np.abs(div) < divisor_floor) & (kappa.coeffs != 0)
    if np.any(bad):
        raise SmallDivisorError(ks[bad], divisor_floor)
    phi = np.zeros_like(kappa.coeffs)
    phi[nz] = sign * kappa.coeffs[nz] / div[nz]
    mean = kappa.coeffs[kappa.N]
    lhs = sign * phi * div
    rhs = kappa.coeffs.copy()
    rhs[kappa.N] = 0
    res = float(np.max(np.abs(lhs - rhs)))
    rel = res / max(2 * np.max(np.abs(phi)) + np.max(np.abs(rhs)), 1e-300)
    mind = float(np.min(np.abs(div[nz]))) if np.any(nz) else float("inf")
    # independent check on an oversampled grid, relative to sup |kappa|
    ph = TrigSeries(phi, kappa.period)
    n = _grid_size(kappa.N, 4)
    kg = kappa.grid(n)
    gl = sign * (ph.shift(a).grid(n) - ph.grid(n)) - (kg - mean)
    grel = _sup(gl) / max(_sup(kg), 1e-300)
    return ScalarSolution(ph, res, mind, complex(mean), float(rel), float(grel))


@dataclass
class MatrixSolution:
    """Solution with absolute residuals and relative ones.

    Relative residuals divide by the size of the terms,
    2 ||Z|| ||Y|| + ||R||, in coefficient (max) and grid (sup) norms.
    """

    Y: TrigMat
    residual: float
    grid_residual: float
    trace_residual: float
    min_divisor: float
    rel_residual: float = float("nan")
    rel_grid_residual: float = float("nan")


def _as_matrix(Z):
    return Z.matrix if isinstance(Z, ParabolicForm) else np.asarray(Z, dtype=float)


def matrix_homological_solve(Z, T, alpha, N_trunc=None, divisor_floor=DEFAULT.divisor_floor):
    """Solve Y(x + alpha) Z - Z Y(x) = Z (T - [T]) with [Y] = 0.

    ``Z`` = s [[1, b], [0, 1]]; ``T`` is a traceless 2 x 2 TrigMat. The
    triangular structure of Z gives the coefficients in closed form
    (mu = exp(2 pi i k alpha / P))::

        y21 = F21 / (mu - 1)
        y11 = (F11 + b y21) / (mu - 1)
        y22 = (F22 - b mu y21) / (mu - 1)
        y12 = (F12 + b y22 - b mu y11) / (mu - 1)

    with F = Z (T - [T]) / s.
    """
    Zm = _as_matrix(Z)
    s = Zm[0, 0]
    if abs(abs(s) - 1) > 1e-12 or abs(Zm[1, 1] - s) > 1e-12 or abs(Zm[1, 0]) > 1e-12:
        raise ValueError("Z must be of the form s [[1, b], [0, 1]]")
    b = Zm[0, 1] / s
    if N_trunc is not None:
        T = T.padded(min(N_trunc, T.N))
    a = alpha_float(alpha)
    Tc = T.coeffs.copy()
    Tc[..., T.N] = 0
    R = np.einsum("ij,jkn->ikn", Zm, Tc)
    F = R / s
    ks = T.ks
    mu = np.exp(2j * np.pi * ks * a / T.period)
    div = mu - 1
    nz = ks != 0
    bad = nz & (np.abs(div) < divisor_floor) & (np.max(np.abs(F), axis=(0, 1)) != 0)
    if np.any(bad):
        raise SmallDivisorError(ks[bad], divisor_floor)
    inv = np.zeros_like(div)
    inv[nz] = 1.0 / div[nz]
    Y = np.zeros_like(F)
    Y[1, 0] = F[1, 0] * inv
    Y[0, 0] = (F[0, 0] + b * Y[1, 0]) * inv
    Y[1, 1] = (F[1, 1] - b * mu * Y[1, 0]) * inv
    Y[0, 1] = (F[0, 1] + b * Y[1, 1] - b * mu * Y[0, 0]) * inv
    Yt = TrigMat(Y, T.period)
    Ys = Y * mu
    lhs = np.einsum("ijn,jk->ikn", Ys, Zm) - np.einsum("ij,jkn->ikn", Zm, Y)
    res = float(np.max(np.abs(lhs - R)))
    zn = float(np.linalg.norm(Zm, 2))
    rel = res / max(2 * zn * np.max(np.abs(Y)) + np.max(np.abs(R)), 1e-300)
    n = _grid_size(T.N, 4)
    Yg = Yt.grid(n)
    Rg = TrigMat(R, T.period).grid(n)
    gl = _sup(Yt.shift(a).grid(n) @ Zm - Zm @ Yg - Rg)
    rel_gl = gl / max(2 * zn * _sup(Yg) + _sup(Rg), 1e-300)
    tr = float(np.max(np.abs(Y[0, 0] + Y[1, 1])))
    mind = float(np.min(np.abs(div[nz]))) if np.any(nz) else float("inf")
    return MatrixSolution(Yt, res, gl, tr, mind, float(rel), float(rel_gl))


# ----------------------------------------------------------------------------
# one KAM step and the certificate

def dexp_inverse(Z0, Q):
    """Z1 with Z1 + (Z0 Z1 + Z1 Z0)/2 + Z0 Z1 Z0 / 6 = Q (valid when Z0^2 = 0)."""
    Z0 = np.asarray(Z0, dtype=float)
    if np.max(np.abs(Z0 @ Z0)) > 1e-12 * max(1.0, np.max(np.abs(Z0)) ** 2):
        raise ValueError("Z0 must be nilpotent")
    L = np.zeros((4, 4))
    for j in range(4):
        E = np.zeros(4)
        E[j] = 1
        Y = E.reshape(2, 2)
        L[:, j] = (Y + 0.5 * (Z0 @ Y + Y @ Z0) + Z0 @ Y @ Z0 / 6).ravel()
    return np.linalg.solve(L, np.asarray(Q, dtype=float).ravel()).reshape(2, 2)


@dataclass
class CertificateVerdict:
    epsilon: float
    d: float
    verdict: str  # "hyperbolic", "elliptic" or "marginal"
    exponent: float


@dataclass
class GapCertificate:
    """First-order normal form D = Z0 + eps Z1 of the averaged perturbed cocycle."""

    Z0: np.ndarray
    Z1: np.ndarray
    verdicts: list
    hyperbolic_side: int  # sign of eps that opens hyperbolicity, 0 if undecided

    def to_json(self):
        return {"Z0": self.Z0.tolist(), "Z1": self.Z1.tolist(),
                "hyperbolic_side": self.hyperbolic_side,
                "verdicts": [vars(v) for v in self.verdicts]}


def gap_certificate(Z, P_avg, epsilons, marginal=1e-14):
    """Classify Z + eps [P] through d = det(Z0 + eps Z1).

    Z = s exp(Z0) with Z0 = [[0, s a], [0, 0]] and Z1 = dexp_{Z0}^{-1}(s [P]).
    d < 0 is hyperbolic with exponent sqrt(-d); |d| < ``marginal`` is
    reported as marginal.
    """
    if not isinstance(Z, ParabolicForm):
        raise TypeError("Z must be a ParabolicForm")
    if abs(Z.a) < marginal:
        raise ValueError("a = 0: the constant part is +-I, no certificate")
    s = Z.sign
    Z0 = np.array([[0.0, s * Z.a], [0.0, 0.0]])
    Z1 = dexp_inverse(Z0, s * np.real(np.asarray(P_avg)))
    out = []
    for eps in np.atleast_1d(epsilons):
        D = Z0 + eps * Z1
        d = float(D[0, 0] * D[1, 1] - D[0, 1] * D[1, 0])
        if abs(d) < marginal:
            v = "marginal"
        else:
            v = "hyperbolic" if d < 0 else "elliptic"
        out.append(CertificateVerdict(float(eps), d, v, math.sqrt(-d) if d < 0 else 0.0))
    lead = -Z0[0, 1] * Z1[1, 0]  # d = lead * eps + O(eps^2)
    side = 0 if abs(lead) < marginal else (1 if lead < 0 else -1)
    return GapCertificate(Z0, Z1, out, side)


@dataclass
class KamStepReport:
    Z: ParabolicForm
    Y: TrigMat
    P_mean: np.ndarray
    epsilons: list
    residuals: list
    homological_residual: float
    trace_residual: float
    min_divisor: float
    pre_residual: float = 0.0
    wiring_residual: float | None = None
    closed_form_residual: float | None = None

    @property
    def ratio(self):
        """Residual ratio between consecutive epsilons (about 4 when eps halves)."""
        if len(self.residuals) < 2 or self.residuals[1] == 0:
            return float("nan")
        return self.residuals[0] / self.residuals[1]


def kam_step_general(Z, P, alpha, epsilons, M0=None, N_trunc=None, n_grid=None):
    """One averaging step for M_eps = M0 + eps P with M0 close to Z.

    Requires tr(Z^{-1} P) = 0 up to its mean. The conjugacy is
    B1 = exp(eps Y) with Y from :func:`matrix_homological_solve`; the
    reported residual is sup || B1(x+alpha)^{-1} M_eps B1 - M0 - eps [P] ||.
    """
    Zm = _as_matrix(Z)
    Zinv = np.linalg.inv(Zm)
    ZP = TrigMat(np.einsum("ij,jkn->ikn", Zinv, P.coeffs), P.period)
    tr = ZP.coeffs[0, 0] + ZP.coeffs[1, 1]
    trace_res = float(np.max(np.abs(tr)))
    T = TrigMat(ZP.coeffs - 0.5 * tr[None, None, :] * np.eye(2)[:, :, None], P.period)
    sol = matrix_homological_solve(Zm, T, alpha, N_trunc)
    Pbar = P.mean()
    a = alpha_float(alpha)
    N = max(P.N, sol.Y.N, M0.N if isinstance(M0, TrigMat) else 0)
    n = n_grid or _grid_size(N, 4)
    Px = P.grid(n)
    M0x = M0.grid(n) if M0 is not None else np.broadcast_to(Zm, (n, 2, 2))
    Yx, Ys = sol.Y.grid(n), sol.Y.shift(a).grid(n)
    residuals = []
    for eps in epsilons:
        B1, B1s = expm2(eps * Yx), expm2(eps * Ys)
        R = inv2(B1s) @ (M0x + eps * Px) @ B1 - M0x - eps * Pbar
        residuals.append(_sup(R))
    form = Z if isinstance(Z, ParabolicForm) else ParabolicForm(int(np.sign(Zm[0, 0])),
                                                                float(Zm[0, 1]))
    return KamStepReport(form, sol.Y, np.asarray(Pbar), list(map(float, epsilons)),
                         residuals, sol.residual, trace_res, sol.min_divisor)


def perturbation_matrix(B, alpha):
    """P(x) = B(x + alpha)^{-1} E11 B(x)."""
    return conjugate_cocycle(B, _const_callable(E11), alpha)


def parabolic_closed_form(B, a, alpha, sign=1):
    """P from the entries of B using B21(x+alpha) = s B11(x) (s = sign).

    For s = 1 and Z = [[1, a], [0, 1]]::

        P = [[B11 B12 - a B11^2, -a B11 B12 + B12^2], [-B11^2, -B11 B12]]
    """
    if sign != 1:
        raise ValueError("closed form written for s = +1")
    b11, b12 = B.entry(0, 0), B.entry(0, 1)
    p11 = b11 * b12 - b11 * b11 * a
    p12 = b11 * b12 * (-a) + b12 * b12
    p21 = -(b11 * b11)
    p22 = -(b11 * b12)
    return TrigMat.from_entries([[p11, p12], [p21, p22]], B.period)


def kam_step(B, lam, E0, alpha, epsilons=(1e-3, 5e-4), Z=None, pre_tol=1e-6, N_trunc=None):
    """One KAM step at E0 + eps for a conjugacy B reducing A_{E0} to parabolic Z.

    Raises
    ------
    ArithmeticError
        When B(x+alpha)^{-1} A_{E0} B(x) misses Z by more than ``pre_tol``.
    """
    a = alpha_float(alpha)
    A0 = amo_matrix(lam, E0)
    M0 = conjugate_cocycle(B, A0, alpha)
    if Z is None:
        m = M0.mean().real
        s = 1 if m[0, 0] + m[1, 1] > 0 else -1
        Z = ParabolicForm(s, float(m[0, 1]))
    n = _grid_size(max(M0.N, B.N), 4)
    pre = _sup(M0.grid(n) - Z.matrix)
    if pre > pre_tol:
        raise ArithmeticError(f"B does not reduce A to Z (residual {pre:.3g})")
    P = perturbation_matrix(B, alpha)
    rep = kam_step_general(Z, P, alpha, epsilons, M0=M0, N_trunc=N_trunc)
    rep.pre_residual = pre
    Bx, Bs = B.grid(n), B.shift(a).grid(n)
    rep.wiring_residual = _sup(Bs[:, 1, 0] - Z.sign * Bx[:, 0, 0])
    if Z.sign == 1:
        Pc = parabolic_closed_form(B, Z.a, alpha)
        m = _grid_size(max(Pc.N, P.N), 4)
        rep.closed_form_residual = _sup(Pc.grid(m) - P.grid(m))
    return rep


# ----------------------------------------------------------------------------
# rational approximants: the same step along a periodic orbit

@dataclass
class EdgeCertificate:
    E0: float
    theta: float
    Z: ParabolicForm
    P_avg: np.ndarray
    orbit_residual: float
    certificate: GapCertificate


def _orbit_points(theta, pq):
    p, q = pq.numerator, pq.denominator
    return np.mod(theta + np.array([(k * p) % q for k in range(q)]) / q, 1.0)


def rational_edge_certificate(lam, pq, E0, epsilons, theta=None, marginal=1e-14):
    """Gap certificate at a band edge E0 of the rational approximant alpha = p/q.

    Along the extremal orbit x_k = theta* + k p/q the monodromy is
    s [[1, a'], [0, 1]] in a frame B_0. Spreading a' evenly gives the step
    Z = [[1, a'/q], [0, 1]] and frames B_{k+1} = A(x_k) B_k Z^{-1}, with
    B_q = s B_0. Then B_{k+1}^{-1} A_{E0+eps}(x_k) B_k = Z + eps P_k and the
    certificate uses the orbit average [P].
    """
    pq = as_fraction(pq)
    q = pq.denominator
    if theta is None:
        th_max, th_min, _ = extremal_thetas(lam, pq)
        theta = min((th_max, th_min),
                    key=lambda t: abs(abs(discriminant(E0, t, lam, pq)) - 2))
    xs = _orbit_points(theta, pq)
    A = amo_matrix(lam, E0)(xs)
    M = np.eye(2)
    for k in range(q):
        M = A[k] @ M
    s = 1 if np.trace(M) > 0 else -1
    Nil = s * M - np.eye(2)
    j = int(np.argmax(np.linalg.norm(Nil, axis=0)))
    v = Nil[:, j]
    if np.linalg.norm(v) < 1e-13:
        v = np.array([1.0, 0.0])
    v = v / np.linalg.norm(v)
    B0 = np.array([[v[0], -v[1]], [v[1], v[0]]])
    Mc = np.linalg.inv(B0) @ (s * M) @ B0
    a_step = Mc[0, 1] / q
    Zs = np.array([[1.0, a_step], [0.0, 1.0]])
    Zinv = np.linalg.inv(Zs)
    Bk = [B0]
    for k in range(q):
        Bk.append(A[k] @ Bk[-1] @ Zinv)
    orbit_res = float(np.max(np.abs(Bk[q] - s * B0)))
    Ps = [np.linalg.inv(Bk[k + 1]) @ E11 @ Bk[k] for k in range(q)]
    P_avg = np.mean(Ps, axis=0)
    form = ParabolicForm(1, float(a_step))
    cert = gap_certificate(form, P_avg, epsilons, marginal)
    return EdgeCertificate(float(E0), float(theta), form, P_avg, orbit_res, cert)


# ----------------------------------------------------------------------------
# Wronskian of the dual recursion

@dataclass
class WronskianReport:
    values: np.ndarray
    value: float
    drift: float
    dependent: bool
    recursion_residual: float


def dual_potential(ks, alpha, step=1, theta=0.0):
    """2 cos 2pi(theta + k alpha) (step 1) or 2 cos(2pi theta + pi k alpha) (step 2)."""
    a = alpha_float(alpha)
    ks = np.asarray(ks, dtype=float)
    if step == 1:
        return 2 * np.cos(2 * np.pi * (theta + ks * a))
    if step == 2:
        return 2 * np.cos(2 * np.pi * theta + np.pi * ks * a)
    raise ValueError("step must be 1 or 2")


def solve_recursion(init, n, lam, E, alpha, step=1, theta=0.0, start=0):
    """Extend ``init`` (first 2*step values) by lam (f_{k+s} + f_{k-s}) + v_k f_k = E f_k."""
    f = list(map(float, init))
    if len(f) != 2 * step:
        raise ValueError("need 2*step initial values")
    while len(f) < n:
        k = start + len(f) - step
        v = dual_potential([k], alpha, step, theta)[0]
        f.append(((E - v) * f[k - start] - lam * f[k - start - step]) / lam)
    return np.array(f[:n])


def wronskian(f, g, lam, E, alpha, step=1, theta=0.0, start=0, tol=1e-10, dep_tol=1e-10):
    """Wronskian of two solutions of the dual recursion with step 1 or 2.

    step 1: W_n = f_n g_{n+1} - g_n f_{n+1}
    step 2: W_n = f_n g_{n+2} + f_{n-1} g_{n+1} - g_n f_{n+2} - g_{n-1} f_{n+1}

    Raises
    ------
    ValueError
        When f or g violates the recursion by more than ``tol`` (relative).
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape or f.ndim != 1 or f.size < 2 * step + 2:
        raise ValueError("f and g must be equal-length 1-d sequences")
    n = f.size
    ks = start + np.arange(n)
    v = dual_potential(ks, alpha, step, theta)
    worst = 0.0
    for h in (f, g):
        mid = slice(step, n - step)
        r = lam * (h[2 * step:] + h[:n - 2 * step]) + (v[mid] - E) * h[mid]
        worst = max(worst, float(np.max(np.abs(r))) / max(np.max(np.abs(h)), 1e-300))
    if worst > tol:
        raise ValueError(f"sequence does not solve the recursion (residual {worst:.3g})")
    if step == 1:
        W = f[:-1] * g[1:] - g[:-1] * f[1:]
        win = 2
    else:
        W = f[1:-2] * g[3:] + f[:-3] * g[2:-1] - g[1:-2] * f[3:] - g[:-3] * f[2:-1]
        win = 4
    scale = max(np.max(np.abs(f)) * np.max(np.abs(g)), 1e-300)
    val = float(np.mean(W))
    drift = float(np.max(np.abs(W - W[0]))) / scale
    # |W_n| <= |F_n| |G_n| for the local state vectors; the ratio is a sine of
    # the angle between them, and dependence means it vanishes at every site
    F = np.lib.stride_tricks.sliding_window_view(f, win)
    G = np.lib.stride_tricks.sliding_window_view(g, win)
    local = np.linalg.norm(F, axis=1) * np.linalg.norm(G, axis=1)
    sines = np.abs(W) / np.maximum(local, 1e-300)
    return WronskianReport(W, val, drift, bool(np.max(sines) <= dep_tol), worst)


# ----------------------------------------------------------------------------
# pipeline

@dataclass
class SurrogatePhase:
    theta: float
    E: float
    gap: float
    special: int | None  # j when theta = j alpha / 2 (+ 1/2)


def theta_surrogates(lam, alpha, E, M=120, n_grid=256, J=8, window=0.05):
    """Phases ranked by how close an eigenvalue of the truncated dual is to E.

    Candidates are a uniform grid plus the half-orbit phases j alpha / 2 and
    j alpha / 2 + 1/2 (|j| <= J), where gap edges sit.
    """
    a = alpha_float(alpha)
    cands = [((j * a / 2) % 1.0, j) for j in range(-J, J + 1)]
    cands += [((j * a / 2 + 0.5) % 1.0, j) for j in range(-J, J + 1)]
    cands += [(i / n_grid, None) for i in range(n_grid)]
    out = []
    for th, j in cands:
        d, e = dual_operator(lam, alpha, th, M)
        try:
            w = eigh_tridiagonal(d, e, eigvals_only=True, select="v",
                                 select_range=(E - window, E + window))
        except np.linalg.LinAlgError:
            continue
        for ev in w:
            out.append(SurrogatePhase(float(th), float(ev), float(abs(ev - E)), j))
    if not out:
        raise ArithmeticError(f"no dual eigenvalue within {window} of E = {E}")
    # stable sort keeps half-orbit phases ahead of grid phases on ties
    return sorted(out, key=lambda c: c.gap)


def theta_surrogate(lam, alpha, E, M=120, **kw):
    """Best candidate of :func:`theta_surrogates`."""
    return theta_surrogates(lam, alpha, E, M, **kw)[0]


@dataclass
class PipelineResult:
    case: str
    E_request: float
    E: float
    theta: float
    n_j: int
    B: TrigMat
    normal_form: object
    degree: int
    rho: float
    rho_residual: float
    period_class: str
    ledger: list = field(default_factory=list)
    pair: DualEigenpair | None = field(default=None, repr=False)

    def to_json(self):
        nf = (self.normal_form.to_json() if isinstance(self.normal_form, ParabolicForm)
              else {"rotation": self.normal_form})
        return {"case": self.case, "E_request": self.E_request, "E": self.E,
                "theta": self.theta, "n_j": self.n_j, "normal_form": nf,
                "degree": self.degree, "rho": self.rho, "rho_residual": self.rho_residual,
                "period_class": self.period_class, "ledger": self.ledger,
                "B": self.B.to_json(1e-16)}


def _half_orbit_index(theta, alpha, K, tol=1e-9):
    """k with 2 theta = k alpha (mod 1), |k| <= K, or None."""
    a = alpha_float(alpha)
    ks = np.arange(-K, K + 1)
    v = 2 * theta - ks * a
    dist = np.abs(v - np.round(v))
    i = int(np.argmin(dist))
    return int(ks[i]) if dist[i] < tol else None


def _frac_dist(v):
    return float(abs(v - round(v)))


def reduce_pipeline(lam, alpha, E, config=DEFAULT, M=120, n_rho=200_000, tol=1e-8,
                    n_tries=16):
    """Analytic reduction of S_{lam,E} from a localized dual eigenvector.

    Case B (2 theta in alpha Z + Z, gap edges): parabolic normal form
    [[s, a], [0, s]] on R/2Z, moved to R/Z when the conjugacy has only
    even modes. Case A: rotation normal form rot(angle).

    Every stage appends a record {stage, quantity, value, tol, ok} to the ledger.
    """
    ledger = []

    def log(stage, quantity, value, bound=None):
        ok = None if bound is None else bool(value <= bound)
        ledger.append({"stage": stage, "quantity": quantity, "value": float(value),
                       "tol": bound, "ok": ok})
        if ok is False:
            raise PipelineError(f"{stage}: {quantity} = {value:.3g} exceeds {bound:g}", ledger)

    a = alpha_float(alpha)
    pair = None
    for sur in theta_surrogates(lam, alpha, E, M)[:n_tries]:
        pairs = dual_eigenpairs(lam, alpha, sur.theta, M, which=(sur.E - 1e-9, sur.E + 1e-9),
                                config=config, resonance=False)
        pairs = [p for p in pairs if p.boundary_mass <= config.boundary_mass]
        if pairs:
            pair = min(pairs, key=lambda p: abs(p.E - sur.E))
            break
    if pair is None:
        raise ArithmeticError(f"no localized dual eigenpair near E = {E}")
    log("surrogate", "|E_eig - E|", abs(pair.E - E))
    log("dual", "eigen residual", pair.residual, config.residual_tol)
    log("dual", "boundary mass", pair.boundary_mass, config.boundary_mass)
    bv = bloch_vector(pair, alpha=alpha)
    log("bloch", "identity residual", bv.identity_residual, config.residual_tol)
    log("bloch", "duality defect sup|g|", bv.g.sup_norm())
    Ecur = pair.E
    A = amo_matrix(lam, Ecur)
    nj = _half_orbit_index(pair.theta, alpha, 2 * M + 2)
    rho = float(rotation_numbers(lam, [Ecur], alpha, n_iters=n_rho, check=False)[0])

    if nj is None:
        re = realify(bv.U.trim(1e-18), pair.theta)
        log("realify", "|det(S,T)| variation", re.det_variation / abs(re.det_value), 1e-6)
        rr = rotation_residual(re.W, A, alpha, re.angle)
        log("reduce", "rotation residual", rr, tol)
        B = re.W
        deg = degree(B)
        pred = 2 * re.angle + deg * a
        rres = min(_frac_dist(2 * rho - pred), _frac_dist(2 * rho + pred))
        log("rotation", "||2 rho - (2 angle + deg alpha)||", rres)
        return PipelineResult("A", float(E), float(Ecur), pair.theta, 0, B, re.angle, deg,
                              rho, rres, "even", ledger, pair)

    U = modulate(bv.U.trim(1e-18), nj)
    th_t = pair.theta - nj * a / 2
    s = 1 if math.cos(2 * np.pi * th_t) > 0 else -1
    log("case-B", "|sin 2pi theta~|", abs(math.sin(2 * np.pi * th_t)), 1e-9)
    n = _grid_size(U.N, 8)
    vals = U.grid(n)[:, :, 0]
    sq = np.sum(vals * vals)
    omega = np.sqrt(sq / abs(sq))
    Wc = U * (1 / omega)
    W = Wc.real_part()
    imag = np.max(np.abs(Wc.coeffs - W.coeffs)) / np.max(np.abs(Wc.coeffs))
    log("case-B", "imaginary part of phase-fixed column", imag, 1e-8)
    comp = complete_to_sl2(W, det_tol=config.det_tol)
    log("complete", "det residual", comp.det_residual, config.det_tol)
    C1 = conjugate_cocycle(comp.B, A, alpha)
    x = 2 * np.arange(_grid_size(C1.N, 4)) / _grid_size(C1.N, 4)
    C1x = C1(x)
    log("complete", "lower-left residual", _sup(C1x[:, 1, 0]), tol)
    log("complete", "diagonal residual",
        max(_sup(C1x[:, 0, 0] - s), _sup(C1x[:, 1, 1] - s)), tol)
    kappa = C1.entry(0, 1).real_part().trim(1e-15)
    sol = scalar_homological_solve(kappa, alpha, s, config.divisor_floor)
    log("homological", "scalar residual", sol.residual, config.residual_tol)
    log("homological", "min divisor", sol.min_divisor)
    phi = sol.phi.real_part()
    one = TrigSeries.constant(1.0, 0, 2)
    zero = TrigSeries.constant(0.0, 0, 2)
    shear = TrigMat.from_entries([[one, phi], [zero, one]], 2)
    B = (comp.B @ shear).real_part().trim(1e-15)
    Z = ParabolicForm(s, float(sol.mean.real))
    C2 = conjugate_cocycle(B, A, alpha)
    xx = 2 * np.arange(_grid_size(C2.N, 4)) / _grid_size(C2.N, 4)
    log("reduce", "parabolic residual", _sup(C2(xx) - Z.matrix), tol)
    deg = degree(B)
    cls = parity_class(B)
    if cls == "even":
        B = to_period1(B)
    rres = min(_frac_dist(2 * rho - deg * a), _frac_dist(2 * rho + deg * a))
    log("rotation", "||2 rho - deg alpha||", rres)
    return PipelineResult("B", float(E), float(Ecur), pair.theta, nj, B, Z, deg, rho, rres,
                          cls, ledger, pair)


__all__ = [
    "ParabolicForm", "SmallDivisorError", "to_period2", "to_period1", "modulate",
    "parity_class", "BlochVector", "bloch_vector", "Completion", "complete_to_sl2",
    "Realified", "realify", "rotation_residual", "ScalarSolution",
    "scalar_homological_solve", "MatrixSolution", "matrix_homological_solve",
    "dexp_inverse", "CertificateVerdict", "GapCertificate", "gap_certificate",
    "KamStepReport", "kam_step_general", "kam_step", "perturbation_matrix",
    "parabolic_closed_form", "EdgeCertificate", "rational_edge_certificate",
    "WronskianReport", "dual_potential", "solve_recursion", "wronskian",
    "SurrogatePhase", "theta_surrogate", "theta_surrogates", "PipelineResult", "reduce_pipeline",
]
