"""Dual almost Mathieu eigenproblem and the localization toolkit.

Conventions
-----------
Dual operator   (H^ u)_k = lam (u_{k+1} + u_{k-1}) + 2 cos 2pi(theta + k alpha) u_k.
Check operator  H_check = H_{1/lam}: unit hopping, potential (2/lam) cos.
The identity H^ = lam * H_check is exact at the matrix level.

P_k(theta) = det(E - H_{[0,k-1]}) for the operator with hopping 1 and
potential 2 lc cos 2pi(theta + j alpha), where ``lc`` is the coupling passed
in (lc = 1/lam for H_check). Its recursion is
P_k = (E - v_{k-1}) P_{k-1} - P_{k-2}, so that P_k is the (1,1) entry of
the k-step transfer matrix of S_{lc,E}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded
from scipy.optimize import minimize_scalar

from .config import DEFAULT
from .frequency import IrrationalFrequency, ResonanceTable, alpha_float
from .spectrum import sturm_count
from .cocycle import offsets

_TINY = 1e-300


# ----------------------------------------------------------------------------
# operators

def phases(alpha, theta, lo, hi):
    """theta + k alpha mod 1 for k = lo..hi, with exact orbit reduction."""
    M = max(abs(lo), abs(hi))
    if isinstance(alpha, Fraction):
        ks = np.arange(lo, hi + 1)
        offs = np.mod(ks * alpha.numerator, alpha.denominator) / alpha.denominator
    else:
        pos = offsets(alpha, M + 1)
        ks = np.arange(lo, hi + 1)
        offs = np.where(ks >= 0, pos[np.abs(ks)], np.mod(-pos[np.abs(ks)], 1.0))
    return np.mod(float(theta) + offs, 1.0)


def dual_operator(lam, alpha, theta, M):
    """Diagonal and off-diagonal of the (2M+1)-site dual operator."""
    d = 2 * np.cos(2 * np.pi * phases(alpha, theta, -M, M))
    return d, np.full(2 * M, float(lam))


def check_operator(lam, alpha, theta, M):
    """Diagonal and off-diagonal of the truncated H_{1/lam}."""
    d = (2.0 / lam) * np.cos(2 * np.pi * phases(alpha, theta, -M, M))
    return d, np.ones(2 * M)


# ----------------------------------------------------------------------------
# eigenpairs

@dataclass
class DualEigenpair:
    """Eigenpair of the truncated dual operator, stored in log form.

    Indices are relative to the peak: ``k`` runs over ``lo..hi`` and
    |u_0| = 1 is the maximum. ``theta`` is the phase after centring
    (theta_input + center * alpha).
    """

    E: float
    lam: float
    theta: float
    theta_input: float
    center: int
    lo: int
    hi: int
    log_abs: np.ndarray
    signs: np.ndarray
    residual: float
    boundary_mass: float
    clean: bool
    decay_rate: float = float("nan")
    resonance_ctx: object = None
    alpha: object = field(default=None, repr=False)

    @property
    def ks(self):
        return np.arange(self.lo, self.hi + 1)

    @property
    def coeffs(self):
        return self.signs * np.exp(self.log_abs)

    @property
    def window(self):
        return (self.lo, self.hi)

    def coeff(self, k):
        return float(self.signs[k - self.lo] * math.exp(self.log_abs[k - self.lo]))


def _riccati_profiles(d, off, E, centers):
    """Log-moduli and signs of eigenvectors from two-sided ratio recursions.

    From the right, t_i = u_i / u_{i-1} with u_n = 0; from the left,
    s_i = u_i / u_{i+1} with u_{-1} = 0. Both recursions run in their
    stable direction, so entries far below machine epsilon relative to the
    peak keep full relative accuracy.
    """
    n = d.size
    nE = E.size
    t = np.empty((n, nE))
    s = np.empty((n, nE))
    den = E - d[n - 1]
    t[n - 1] = off / np.where(den == 0, _TINY, den)
    for i in range(n - 2, -1, -1):
        den = (E - d[i]) - off * t[i + 1]
        t[i] = off / np.where(den == 0, _TINY, den)
    den = E - d[0]
    s[0] = off / np.where(den == 0, _TINY, den)
    for i in range(1, n):
        den = (E - d[i]) - off * s[i - 1]
        s[i] = off / np.where(den == 0, _TINY, den)
    lt, ls = np.log(np.abs(t)), np.log(np.abs(s))
    nt, ns = (t < 0).astype(np.int64), (s < 0).astype(np.int64)
    CT, CS = np.cumsum(lt, 0), np.cumsum(ls, 0)
    NT, NS = np.cumsum(nt, 0), np.cumsum(ns, 0)
    zero = np.zeros((1, nE))
    CSp = np.vstack([zero, CS])  # CSp[i] = sum_{j < i} ls[j]
    NSp = np.vstack([zero.astype(np.int64), NS])
    idx = np.arange(n)[:, None]
    p = centers[None, :]
    cols = np.arange(nE)
    logu = np.where(idx > p, CT - CT[centers, cols][None, :],
                    np.where(idx < p, CSp[centers, cols][None, :] - CSp[:n], 0.0))
    par = np.where(idx > p, NT - NT[centers, cols][None, :],
                   np.where(idx < p, NSp[centers, cols][None, :] - NSp[:n], 0))
    sign = np.where(par % 2 == 0, 1.0, -1.0)
    return logu, sign


def _fit_rate(k, logu):
    """Least-squares decay rate of log|u| against |k| (positive = decaying)."""
    x = np.abs(k).astype(float)
    if np.unique(x).size < 2:
        return float("nan")
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, logu, rcond=None)
    return float(-coef[0])


def strong_windows(res_sites, extent, C0=3.0):
    """Windows C0|n_j| < |k| < |n_{j+1}|/C0, the last one open up to ``extent``.

    Returns a list of (lo, hi, note); empty windows carry a note and
    lo >= hi.
    """
    sites = sorted({abs(int(n)) for n in res_sites})
    out = []
    for i, n in enumerate(sites):
        lo = C0 * n
        hi = sites[i + 1] / C0 if i + 1 < len(sites) else float(extent) + 1
        note = "" if lo < hi - 1 else "empty window"
        out.append((lo, hi, note))
    return out


def _fit_window(pair, lo, hi, exclude_frac=0.1):
    k = pair.ks
    ak = np.abs(k)
    mask = (ak > lo) & (ak < hi)
    if not mask.any():
        return float("nan")
    top = ak[mask].max()
    cut = max(lo, exclude_frac * top)
    mask &= ak > cut
    # fit the envelope max(|u_k|, |u_-k|); fewer than 3 radii cannot fix a rate
    radii, inv = np.unique(ak[mask], return_inverse=True)
    if radii.size < 3:
        return float("nan")
    env = np.full(radii.size, -np.inf)
    np.maximum.at(env, inv, pair.log_abs[mask])
    return _fit_rate(radii, env)


def dual_eigenpairs(lam, alpha, theta, M, which=None, config=DEFAULT, resonance=True,
                    chunk=512):
    """Eigenpairs of the (2M+1)-site dual operator with energies in ``which``.

    Parameters
    ----------
    lam : float
        Dual hopping, 0 < |lam| < 1 for the localized regime.
    alpha : Fraction or IrrationalFrequency
    theta : float or Fraction
    M : int
        Window half-width, M >= 1.
    which : (float, float), optional
        Energy window; all eigenpairs when omitted.
    resonance : bool
        Attach resonance reports (needs an irrational frequency).

    Returns
    -------
    list of DualEigenpair
        Empty when no eigenvalue lies in ``which``.
    """
    if lam == 0:
        raise ValueError("lam must be nonzero")
    if M < 1:
        raise ValueError("M must be >= 1")
    d, e = dual_operator(lam, alpha, theta, M)
    n = d.size
    if which is None:
        w, V = eigh_tridiagonal(d, e)
    else:
        lo_e, hi_e = which
        w, V = eigh_tridiagonal(d, e, select="v", select_range=(lo_e, hi_e))
    if w.size == 0:
        return []
    peaks = np.argmax(np.abs(V), axis=0)
    out = []
    table = None
    eps0 = None
    if resonance and isinstance(alpha, IrrationalFrequency) and alpha.rational is None:
        # ||2(theta + c alpha) - k alpha|| for |k| <= 2M + |c| and |c| <= M
        table = ResonanceTable(Fraction(theta), 4 * M + 2, alpha)
        eps0 = config.eps0(alpha.beta_hat)
    a_f = alpha_float(alpha)
    edge = max(1, int(math.ceil(M / 10)))
    for start in range(0, w.size, chunk):
        Ec = w[start:start + chunk]
        logu, sign = _riccati_profiles(d, lam, Ec, peaks[start:start + chunk])
        for j in range(Ec.size):
            lu = logu[:, j]
            p = int(np.argmax(lu))
            lu = lu - lu[p]
            sg = sign[:, j] * sign[p, j]
            u = sg * np.exp(lu)
            Hu = d * u
            Hu[:-1] += lam * u[1:]
            Hu[1:] += lam * u[:-1]
            resid = float(np.linalg.norm(Hu - Ec[j] * u) / np.linalg.norm(u))
            mass = np.exp(2 * lu)
            bmass = float((mass[:edge].sum() + mass[-edge:].sum()) / mass.sum())
            c = p - M
            th_c = (float(theta) + c * a_f) % 1.0
            pair = DualEigenpair(
                E=float(Ec[j]), lam=float(lam), theta=th_c, theta_input=float(theta),
                center=c, lo=-M - c, hi=M - c, log_abs=lu, signs=sg,
                residual=resid, boundary_mass=bmass,
                clean=bmass <= config.boundary_mass, alpha=alpha)
            windows = [(0.0, float(max(M - c, M + c)) + 1, "")]
            if table is not None:
                ext = max(abs(pair.lo), abs(pair.hi))
                pair.resonance_ctx = table.report(eps0, ext, shift=c)
                windows = strong_windows(pair.resonance_ctx.sites, ext, config.C0)
            best = max(windows, key=lambda t: t[1] - t[0])
            pair.decay_rate = _fit_window(pair, best[0], best[1])
            out.append(pair)
    return out


@dataclass
class WindowCheck:
    lo: float
    hi: float
    n_points: int
    C: float
    rate: float
    note: str = ""


@dataclass
class LocalizationReport:
    """Outcome of the windowed decay check for one eigenpair."""

    C: float
    eps1: float
    L: float
    windows: list
    in_regime: bool
    verdict: object  # True / False, or None when outside the regime (report only)

    @property
    def min_rate(self):
        r = [w.rate for w in self.windows if w.n_points and not math.isnan(w.rate)]
        return min(r) if r else float("nan")


def verify_strong_localization(pair, C0=3.0, eps1=None, config=DEFAULT, C_max=1e3):
    """Check |u_k| <= C exp(-eps1 |k|) inside every resonance window.

    Returns the minimal feasible C (max over windows of |u_k| e^{eps1 |k|})
    and per-window fitted rates. Outside the small-coupling regime
    |lam| < exp(-C2 beta) the verdict is None (report only).
    """
    L = -math.log(abs(pair.lam))
    eps1 = L / 64 if eps1 is None else eps1
    ext = max(abs(pair.lo), abs(pair.hi))
    sites = pair.resonance_ctx.sites if pair.resonance_ctx is not None else [0]
    k = pair.ks
    ak = np.abs(k)
    checks = []
    Cmax = 0.0
    for lo, hi, note in strong_windows(sites, ext, C0):
        mask = (ak > lo) & (ak < hi)
        if note or not mask.any():
            checks.append(WindowCheck(lo, hi, 0, float("nan"), float("nan"),
                                      note or "outside truncation"))
            continue
        logC = float(np.max(pair.log_abs[mask] + eps1 * ak[mask]))
        C = math.exp(min(logC, 700.0))
        rate = _fit_window(pair, lo, hi)
        checks.append(WindowCheck(lo, hi, int(mask.sum()), C, rate))
        Cmax = max(Cmax, C)
    beta = pair.alpha.beta_hat if isinstance(pair.alpha, IrrationalFrequency) else 0.0
    regime = config.in_regime(pair.lam, beta)
    verdict = None
    if regime:
        verdict = bool(math.isfinite(Cmax) and Cmax <= C_max)
    return LocalizationReport(Cmax, eps1, L, checks, regime, verdict)


# ----------------------------------------------------------------------------
# determinants and Green functions

def _potential(lc, alpha, theta, lo, n):
    return 2 * lc * np.cos(2 * np.pi * phases(alpha, theta, lo, lo + n - 1)) if n else np.zeros(0)


def pk_sequence(v, E):
    """Scaled P_j = det(E - H_[0,j-1]) for j = 0..len(v), unit hopping.

    Returns
    -------
    mant, logs : arrays of length len(v) + 1 with P_j = mant_j * exp(logs_j).
    """
    n = len(v)
    mant = np.empty(n + 1)
    logs = np.empty(n + 1)
    a, b, lg = 1.0, 0.0, 0.0  # a = P_j, b = P_{j-1} (common scale exp(lg))
    mant[0], logs[0] = 1.0, 0.0
    for j in range(n):
        a, b = (E - v[j]) * a - b, a
        s = max(abs(a), abs(b))
        if s > 0 and (s > 1e100 or s < 1e-100):
            a, b = a / s, b / s
            lg += math.log(s)
        mant[j + 1], logs[j + 1] = a, lg
    return mant, logs


def _log_abs(m, lg):
    return np.log(np.abs(m)) + lg if np.ndim(m) else (math.log(abs(m)) if m != 0 else -math.inf) + lg


@dataclass(frozen=True)
class ScaledValue:
    mantissa: float
    log_scale: float

    @property
    def value(self):
        return self.mantissa * math.exp(self.log_scale)

    @property
    def log_abs(self):
        return (math.log(abs(self.mantissa)) if self.mantissa else -math.inf) + self.log_scale


def pk_determinant(k, theta, E, lam, alpha):
    """P_k(theta) for coupling ``lam`` (the H_lam block), scale-managed."""
    if k < 0:
        raise ValueError("k must be >= 0")
    v = _potential(lam, alpha, theta, 0, k)
    m, lg = pk_sequence(v, E)
    return ScaledValue(float(m[k]), float(lg[k]))


def count_below_pk(v, E):
    """Eigenvalues of diag(v) + hopping below E, from sign agreements of P_j."""
    m, _ = pk_sequence(v, E)
    sg = np.sign(m)
    # a zero takes the sign opposite to its predecessor (standard convention)
    for j in range(1, sg.size):
        if sg[j] == 0:
            sg[j] = -sg[j - 1]
    return int(np.sum(sg[1:] == sg[:-1]))


@dataclass
class GreenRow:
    """|G_I(x1, y)| and |G_I(y, x2)| by Cramer quotients and by direct solve."""

    I: tuple
    y: int
    E: float
    theta: float
    g_x1: float
    g_x2: float
    direct_x1: float
    direct_x2: float

    @property
    def rel_error(self):
        e1 = abs(self.g_x1 - abs(self.direct_x1)) / max(abs(self.direct_x1), _TINY)
        e2 = abs(self.g_x2 - abs(self.direct_x2)) / max(abs(self.direct_x2), _TINY)
        return max(e1, e2)


def _green_direct(v, E, cols):
    """Columns of (H - E)^{-1} for the unit-hopping tridiagonal block."""
    n = len(v)
    ab = np.zeros((3, n))
    ab[0, 1:] = 1.0
    ab[1] = v - E
    ab[2, :-1] = 1.0
    rhs = np.zeros((n, len(cols)))
    for j, c in enumerate(cols):
        rhs[c, j] = 1.0
    return solve_banded((1, 1), ab, rhs)


def green_log_cramer(I, E, theta, lam, alpha):
    """log|G_I(x1, y)| and log|G_I(y, x2)| for all y in I by Cramer quotients."""
    x1, x2 = I
    k = x2 - x1 + 1
    v = _potential(lam, alpha, theta, x1, k)
    mf, lf = pk_sequence(v, E)  # P_j(theta + x1 alpha)
    mb, lb = pk_sequence(v[::-1], E)  # P_j(theta + (x2 - j + 1) alpha)
    logPk = _log_abs(mf[k], lf[k])
    if not np.isfinite(logPk) or logPk < math.log(_TINY):
        raise ZeroDivisionError(f"H_I - E is singular: |P_{k}| = exp({logPk:.4g})")
    j = np.arange(k)  # y = x1 + j
    g1 = _log_abs(mb[k - 1 - j], lb[k - 1 - j]) - logPk  # P_{x2-y}(theta+(y+1)alpha)
    g2 = _log_abs(mf[j], lf[j]) - logPk  # P_{y-x1}(theta+x1 alpha)
    return g1, g2


def green_entries(I, y, E, theta, lam, alpha):
    """One row of the Green table on I = [x1, x2] for the H_lam block."""
    x1, x2 = I
    if not x1 <= y <= x2:
        raise ValueError("y must lie in I")
    g1, g2 = green_log_cramer(I, E, theta, lam, alpha)
    v = _potential(lam, alpha, theta, x1, x2 - x1 + 1)
    G = _green_direct(v, E, [0, x2 - x1])
    return GreenRow(tuple(I), y, float(E), float(theta),
                    float(np.exp(g1[y - x1])), float(np.exp(g2[y - x1])),
                    float(G[y - x1, 0]), float(G[y - x1, 1]))


def green_table(I, E, theta, lam, alpha):
    """All rows y in I; returns (ys, |G(x1,y)|, |G(y,x2)|, signed direct columns)."""
    x1, x2 = I
    g1, g2 = green_log_cramer(I, E, theta, lam, alpha)
    v = _potential(lam, alpha, theta, x1, x2 - x1 + 1)
    G = _green_direct(v, E, [0, x2 - x1])
    return np.arange(x1, x2 + 1), np.exp(g1), np.exp(g2), G[:, 0], G[:, 1]


def expansion_residual(phi, base, I, E, theta, lam, alpha):
    """max_y |phi(y) + G(x1,y) phi(x1-1) + G(y,x2) phi(x2+1)| on I.

    ``phi`` is indexed from ``base`` (phi[j] is the value at site base + j).
    """
    x1, x2 = I
    v = _potential(lam, alpha, theta, x1, x2 - x1 + 1)
    G = _green_direct(v, E, [0, x2 - x1])
    at = lambda s: phi[s - base] if 0 <= s - base < len(phi) else 0.0
    ys = np.arange(x1, x2 + 1)
    pred = -G[:, 0] * at(x1 - 1) - G[:, 1] * at(x2 + 1)
    vals = np.array([at(s) for s in ys])
    return float(np.max(np.abs(vals - pred)))


@dataclass
class RegularityVerdict:
    regular: bool
    witness: tuple = None
    margin: float = float("nan")  # max over intervals of min_i (-m|y-x_i| - log|G|)
    n_intervals: int = 0


def classify_regular(y, m, k, delta, E, theta, lam, alpha):
    """(m, k)-regularity of y with parameter delta for the H_lam operator."""
    if not 0.1 < delta < 0.5:
        raise ValueError("delta must lie in (1/10, 1/2)")
    if m <= 0:
        raise ValueError("m must be positive")
    dk = delta * k
    starts = [x1 for x1 in range(y - k + 1, y + 1)
              if y - x1 >= dk and (x1 + k - 1) - y >= dk]
    if not starts:
        raise ValueError("no admissible interval: k too small for delta")
    best = -math.inf
    for x1 in starts:
        x2 = x1 + k - 1
        try:
            g1, g2 = green_log_cramer((x1, x2), E, theta, lam, alpha)
        except ZeroDivisionError:
            continue
        j = y - x1
        # |G(y, x1)| = |G(x1, y)| by symmetry
        m1 = -m * (y - x1) - g1[j]
        m2 = -m * (x2 - y) - g2[j]
        marg = min(m1, m2)
        if marg > 0:
            return RegularityVerdict(True, (x1, x2), marg, len(starts))
        best = max(best, marg)
    return RegularityVerdict(False, None, best, len(starts))


# ----------------------------------------------------------------------------
# uniformity and arithmetic bounds

@dataclass
class UniformityReport:
    verdict: bool
    max_product: float  # log of the max Lagrange product
    gamma_fit: float  # log(max)/k
    k: int


def _lagrange_log(x, c, logden):
    """max_i log prod_{j != i} |x - c_j| / |c_i - c_j| at points x."""
    x = np.atleast_1d(x)
    diff = np.abs(x[:, None] - c[None, :])
    ld = np.log(np.maximum(diff, _TINY))
    S = ld.sum(1)
    return S + np.max(-ld - logden[None, :], axis=1)


def gamma_uniform_test(thetas, gamma, refine=True):
    """gamma-uniformity of phases via the Lagrange products on [-1, 1]."""
    c = np.cos(2 * np.pi * np.asarray(thetas, dtype=float))
    k = c.size - 1
    if k < 1:
        raise ValueError("need at least two phases")
    cs = np.sort(c)
    if np.min(np.diff(cs)) <= 1e-12:
        raise ValueError("coincident nodes: cos 2pi theta_i must be distinct")
    diff = np.abs(c[:, None] - c[None, :])
    np.fill_diagonal(diff, 1.0)
    logden = np.log(diff).sum(1)
    n = 8 * k + 1
    xs = np.concatenate([np.cos(np.pi * (np.arange(n) + 0.5) / n), [-1.0, 1.0]])
    vals = _lagrange_log(xs, c, logden)
    best = float(vals.max())
    if refine:
        order = np.sort(xs)
        for i0 in np.argsort(vals)[-4:]:
            x0 = xs[i0]
            pos = np.searchsorted(order, x0)
            a = order[max(pos - 1, 0)]
            b = order[min(pos + 1, order.size - 1)]
            if b <= a:
                continue
            r = minimize_scalar(lambda x: -_lagrange_log(x, c, logden)[0], bounds=(a, b),
                                method="bounded", options={"xatol": 1e-12})
            best = max(best, float(-r.fun))
    return UniformityReport(best < k * gamma, best, best / k, k)


def denominator_index(alpha, y_over_8):
    qs = alpha.denominators()
    n = max(i for i, q in enumerate(qs) if q <= y_over_8)
    if n + 1 >= len(qs):
        raise ValueError("frequency has too few digits for this scale")
    return n, qs[n]


def uniform_set(theta, y, alpha, nj_negative=False):
    """Phases theta + j alpha, j in I1 u I2 of the localization argument.

    q_n <= y/8 < q_{n+1}, s the largest integer with s q_n <= y/8;
    I1 = [-2sq_n+1, 0] (n_j < 0) or [0, 2sq_n-1], I2 = [y-2sq_n+1, y+2sq_n].
    """
    n, q = denominator_index(alpha, y / 8)
    s = int((y / 8) // q)
    if nj_negative:
        I1 = range(-2 * s * q + 1, 1)
    else:
        I1 = range(0, 2 * s * q)
    I2 = range(y - 2 * s * q + 1, y + 2 * s * q + 1)
    js = np.array(sorted(set(I1) | set(I2)))
    lo, hi = int(js.min()), int(js.max())
    ph = phases(alpha, theta, lo, hi)[js - lo]
    return js, ph, s, q


@dataclass
class SinSumReport:
    value: float
    q: int
    l0: int

    @property
    def ratio(self):
        return self.value / self.q if self.q else 0.0


def sin_sum_check(x, n, alpha):
    """sum_{l != l0} ln|sin pi(x + l alpha)| + (q_n - 1) ln 2 over 0 <= l < q_n."""
    q = alpha.denominators()[n] if isinstance(alpha, IrrationalFrequency) else int(n)
    if q <= 1:
        return SinSumReport(0.0, q, 0)
    ph = np.mod(float(x) + offsets(alpha, q), 1.0)
    s = np.abs(np.sin(np.pi * ph))
    l0 = int(np.argmin(s))
    keep = np.ones(q, bool)
    keep[l0] = False
    val = math.fsum(np.log(s[keep])) + (q - 1) * math.log(2)
    return SinSumReport(float(val), int(q), l0)


@dataclass
class GridBoundReport:
    sup: float
    grid_sup: float
    k: int

    @property
    def ratio(self):
        return self.sup / self.grid_sup if self.grid_sup > 0 else math.inf


def polynomial_grid_bound_check(coeffs, x0, r, n, alpha, oversample=32):
    """Dense sup of p against its max on the orbit {x0 + j alpha}, 0 <= j <= k.

    ``coeffs`` maps frequency -> coefficient (dict) or is a TrigSeries; the
    essential degree (support width) must be at most k = r q_n - 1 with
    1 <= r <= floor(q_{n+1}/q_n).
    """
    qs = alpha.denominators()
    q, q1 = qs[n], qs[n + 1]
    if not 1 <= r <= q1 // q:
        raise ValueError("r must satisfy 1 <= r <= floor(q_{n+1}/q_n)")
    k = r * q - 1
    if hasattr(coeffs, "coeffs"):
        modes = {int(j): c for j, c in zip(coeffs.ks, coeffs.coeffs) if c != 0}
    else:
        modes = {int(j): complex(c) for j, c in coeffs.items() if c != 0}
    if not modes:
        return GridBoundReport(0.0, 0.0, k)
    js = np.array(sorted(modes))
    if js.max() - js.min() > k:
        raise ValueError(f"essential degree {js.max() - js.min()} exceeds k = {k}")
    cs = np.array([modes[j] for j in js])
    f = lambda x: np.exp(2j * np.pi * np.multiply.outer(x, js)) @ cs
    xd = np.arange(oversample * (js.max() - js.min() + 1) + 64) / (
        oversample * (js.max() - js.min() + 1) + 64)
    dense = np.abs(f(xd))
    i0 = int(np.argmax(dense))
    h = 1.0 / xd.size
    r0 = minimize_scalar(lambda x: -abs(f(np.array([x]))[0]), bounds=(xd[i0] - h, xd[i0] + h),
                         method="bounded", options={"xatol": 1e-13})
    sup = max(float(dense.max()), float(-r0.fun))
    orbit = np.mod(float(x0) + offsets(alpha, k + 1), 1.0)
    return GridBoundReport(sup, float(np.max(np.abs(f(orbit)))), k)


__all__ = [
    "phases", "dual_operator", "check_operator", "DualEigenpair", "dual_eigenpairs",
    "strong_windows", "verify_strong_localization", "LocalizationReport",
    "pk_sequence", "pk_determinant", "count_below_pk", "ScaledValue", "GreenRow",
    "green_entries", "green_table", "green_log_cramer", "expansion_residual",
    "classify_regular", "gamma_uniform_test", "uniform_set", "sin_sum_check",
    "polynomial_grid_bound_check", "sturm_count",
]
