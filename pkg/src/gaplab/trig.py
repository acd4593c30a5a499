"""Trigonometric series and matrix-valued trigonometric series.

A series on R/(P Z), P in {1, 2}, is stored by its coefficients
c_k, k = -N..N, and represents f(x) = sum_k c_k exp(2 pi i k x / P).
"""

from __future__ import annotations

import math

import numpy as np


def _freqs(N):
    return np.arange(-N, N + 1)


def grid_points(n, period=1):
    return period * np.arange(n) / n


def _coeffs_from_grid(vals, N):
    """Coefficients k = -N..N from samples on an n-point grid (axis 0)."""
    n = vals.shape[0]
    if 2 * N + 1 > n:
        raise ValueError("grid too coarse for the requested truncation")
    F = np.fft.fft(vals, axis=0) / n
    idx = np.arange(-N, N + 1) % n
    return np.moveaxis(F[idx], 0, -1)


def _grid_from_coeffs(c, n):
    """Samples on an n-point grid from coefficients (last axis k = -N..N)."""
    N = (c.shape[-1] - 1) // 2
    if 2 * N + 1 > n:
        raise ValueError("grid too coarse for these coefficients")
    F = np.zeros(c.shape[:-1] + (n,), dtype=complex)
    F[..., np.arange(-N, N + 1) % n] = c
    return np.moveaxis(np.fft.ifft(F, axis=-1) * n, -1, 0)


def _support_radius(a, tol):
    N = (a.size - 1) // 2
    big = np.nonzero(a > tol * max(a.max(), 1e-300))[0]
    if big.size == 0:
        return 0
    return int(max(abs(big[0] - N), abs(big[-1] - N)))


class TrigSeries:
    """Scalar trigonometric series on R/Z (period 1) or R/2Z (period 2)."""

    def __init__(self, coeffs, period=1):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim != 1 or c.size % 2 == 0:
            raise ValueError("coefficients must have odd length 2N+1")
        if period not in (1, 2):
            raise ValueError("period must be 1 or 2")
        self.coeffs = c
        self.period = period

    @property
    def N(self):
        return (self.coeffs.size - 1) // 2

    @property
    def ks(self):
        return _freqs(self.N)

    @classmethod
    def zeros(cls, N, period=1):
        return cls(np.zeros(2 * N + 1, dtype=complex), period)

    @classmethod
    def constant(cls, value, N=0, period=1):
        c = np.zeros(2 * N + 1, dtype=complex)
        c[N] = value
        return cls(c, period)

    @classmethod
    def from_modes(cls, modes, period=1, N=None):
        """Build from a dict {k: c_k}."""
        N = max(abs(k) for k in modes) if N is None else N
        c = np.zeros(2 * N + 1, dtype=complex)
        for k, v in modes.items():
            c[k + N] = v
        return cls(c, period)

    @classmethod
    def from_grid(cls, values, period=1, N=None):
        values = np.asarray(values)
        n = values.shape[0]
        N = (n - 1) // 2 if N is None else N
        return cls(_coeffs_from_grid(values, N), period)

    @classmethod
    def from_function(cls, f, N, period=1, oversample=4):
        n = max(oversample * (2 * N + 1), 16)
        x = grid_points(n, period)
        return cls.from_grid(f(x), period, N)

    def __call__(self, x):
        x = np.asarray(x)
        ph = np.exp(2j * np.pi * np.multiply.outer(x, self.ks) / self.period)
        return ph @ self.coeffs

    def grid(self, n):
        return _grid_from_coeffs(self.coeffs, n)

    def padded(self, N):
        if N == self.N:
            return self
        if N < self.N:
            return TrigSeries(self.coeffs[self.N - N:self.N + N + 1].copy(), self.period)
        c = np.zeros(2 * N + 1, dtype=complex)
        c[N - self.N:N + self.N + 1] = self.coeffs
        return TrigSeries(c, self.period)

    truncate = padded

    def trim(self, tol=1e-18):
        """Smallest symmetric truncation keeping every |c_k| > tol * max|c|."""
        return self.padded(_support_radius(np.abs(self.coeffs), tol))

    def shift(self, alpha):
        """x -> f(x + alpha)."""
        mult = np.exp(2j * np.pi * self.ks * alpha / self.period)
        return TrigSeries(self.coeffs * mult, self.period)

    def mean(self):
        return self.coeffs[self.N]

    def conj(self):
        """Pointwise complex conjugate on the real axis."""
        return TrigSeries(np.conj(self.coeffs[::-1]), self.period)

    def real_part(self):
        return TrigSeries(0.5 * (self.coeffs + np.conj(self.coeffs[::-1])), self.period)

    def imag_part(self):
        return TrigSeries(-0.5j * (self.coeffs - np.conj(self.coeffs[::-1])), self.period)

    def is_real(self, tol=1e-12):
        scale = max(np.max(np.abs(self.coeffs)), 1e-300)
        return np.max(np.abs(self.coeffs - np.conj(self.coeffs[::-1]))) <= tol * scale

    def _align(self, other):
        if isinstance(other, TrigSeries):
            if other.period != self.period:
                raise ValueError("period mismatch")
            N = max(self.N, other.N)
            return self.padded(N), other.padded(N)
        return self, other

    def __add__(self, other):
        a, b = self._align(other)
        if isinstance(b, TrigSeries):
            return TrigSeries(a.coeffs + b.coeffs, a.period)
        c = a.coeffs.copy()
        c[a.N] += b
        return TrigSeries(c, a.period)

    __radd__ = __add__

    def __neg__(self):
        return TrigSeries(-self.coeffs, self.period)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TrigSeries):
            if other.period != self.period:
                raise ValueError("period mismatch")
            return TrigSeries(np.convolve(self.coeffs, other.coeffs), self.period)
        return TrigSeries(self.coeffs * other, self.period)

    __rmul__ = __mul__

    def norm1(self):
        return float(np.sum(np.abs(self.coeffs)))

    def strip_norm(self, h):
        """Upper bound for sup over |Im x| < h (sum of weighted moduli)."""
        w = np.exp(2 * np.pi * np.abs(self.ks) * h / self.period)
        return float(np.sum(np.abs(self.coeffs) * w))

    def sup_norm(self, n=None):
        n = n or max(8 * self.coeffs.size, 64)
        return float(np.max(np.abs(self.grid(n))))

    def decay_rate(self, floor=1e-14):
        """Least-squares slope of -ln|c_k| against |k| (per unit index)."""
        a = np.abs(self.coeffs)
        keep = a > floor * max(a.max(), 1e-300)
        k = np.abs(self.ks[keep])
        if np.unique(k).size < 2:
            return float("inf")
        slope = np.polyfit(k, np.log(a[keep]), 1)[0]
        return float(-slope)

    def tail_energy(self, frac=0.25):
        """Fraction of l2 energy in the outer ``frac`` of the index range."""
        a = np.abs(self.coeffs) ** 2
        cut = int(round((1 - frac) * self.N))
        tail = np.abs(self.ks) > cut
        tot = a.sum()
        return float(a[tail].sum() / tot) if tot > 0 else 0.0

    def to_json(self, tol=0.0):
        return [{"k": int(k), "re": float(c.real), "im": float(c.imag)}
                for k, c in zip(self.ks, self.coeffs) if abs(c) > tol]

    @classmethod
    def from_json(cls, items, period=1):
        if not items:
            return cls.zeros(0, period)
        return cls.from_modes({d["k"]: complex(d["re"], d["im"]) for d in items}, period)

    def __repr__(self):
        return f"TrigSeries(N={self.N}, period={self.period})"


class TrigMat:
    """Matrix-valued trigonometric series, coefficients of shape (r, c, 2N+1)."""

    def __init__(self, coeffs, period=1):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[-1] % 2 == 0:
            raise ValueError("coefficients must have shape (r, c, 2N+1)")
        if period not in (1, 2):
            raise ValueError("period must be 1 or 2")
        self.coeffs = c
        self.period = period

    @property
    def N(self):
        return (self.coeffs.shape[-1] - 1) // 2

    @property
    def shape(self):
        return self.coeffs.shape[:2]

    @property
    def ks(self):
        return _freqs(self.N)

    @classmethod
    def from_entries(cls, entries, period=None):
        """Build from a nested list of TrigSeries (or scalars)."""
        flat = [e for row in entries for e in row if isinstance(e, TrigSeries)]
        period = period or (flat[0].period if flat else 1)
        N = max([e.N for e in flat] + [0])
        r, c = len(entries), len(entries[0])
        out = np.zeros((r, c, 2 * N + 1), dtype=complex)
        for i in range(r):
            for j in range(c):
                e = entries[i][j]
                if isinstance(e, TrigSeries):
                    out[i, j] = e.padded(N).coeffs
                else:
                    out[i, j, N] = e
        return cls(out, period)

    @classmethod
    def constant(cls, M, N=0, period=1):
        M = np.asarray(M, dtype=complex)
        out = np.zeros(M.shape + (2 * N + 1,), dtype=complex)
        out[..., N] = M
        return cls(out, period)

    @classmethod
    def identity(cls, N=0, period=1):
        return cls.constant(np.eye(2), N, period)

    @classmethod
    def from_grid(cls, values, period=1, N=None):
        values = np.asarray(values)
        n = values.shape[0]
        N = (n - 1) // 2 if N is None else N
        return cls(_coeffs_from_grid(values, N), period)

    @classmethod
    def from_function(cls, f, N, period=1, oversample=4):
        n = max(oversample * (2 * N + 1), 16)
        x = grid_points(n, period)
        return cls.from_grid(f(x), period, N)

    def entry(self, i, j):
        return TrigSeries(self.coeffs[i, j], self.period)

    def __call__(self, x):
        x = np.asarray(x)
        ph = np.exp(2j * np.pi * np.multiply.outer(x, self.ks) / self.period)
        return np.einsum("...k,ijk->...ij", ph, self.coeffs)

    def grid(self, n):
        return _grid_from_coeffs(self.coeffs, n)

    def padded(self, N):
        if N == self.N:
            return self
        if N < self.N:
            return TrigMat(self.coeffs[..., self.N - N:self.N + N + 1].copy(), self.period)
        c = np.zeros(self.shape + (2 * N + 1,), dtype=complex)
        c[..., N - self.N:N + self.N + 1] = self.coeffs
        return TrigMat(c, self.period)

    truncate = padded

    def trim(self, tol=1e-18):
        return self.padded(_support_radius(np.max(np.abs(self.coeffs), axis=(0, 1)), tol))

    def shift(self, alpha):
        mult = np.exp(2j * np.pi * self.ks * alpha / self.period)
        return TrigMat(self.coeffs * mult, self.period)

    def mean(self):
        return self.coeffs[..., self.N]

    def conj(self):
        return TrigMat(np.conj(self.coeffs[..., ::-1]), self.period)

    def real_part(self):
        return TrigMat(0.5 * (self.coeffs + np.conj(self.coeffs[..., ::-1])), self.period)

    def is_real(self, tol=1e-12):
        scale = max(np.max(np.abs(self.coeffs)), 1e-300)
        return np.max(np.abs(self.coeffs - np.conj(self.coeffs[..., ::-1]))) <= tol * scale

    def __add__(self, other):
        if isinstance(other, TrigMat):
            N = max(self.N, other.N)
            return TrigMat(self.padded(N).coeffs + other.padded(N).coeffs, self.period)
        out = self.coeffs.copy()
        out[..., self.N] += np.asarray(other)
        return TrigMat(out, self.period)

    def __neg__(self):
        return TrigMat(-self.coeffs, self.period)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, s):
        return TrigMat(self.coeffs * s, self.period)

    __rmul__ = __mul__

    def __matmul__(self, other):
        """Exact product by coefficient convolution."""
        if not isinstance(other, TrigMat):
            other = TrigMat.constant(other, 0, self.period)
        if other.period != self.period:
            raise ValueError("period mismatch")
        r, m = self.shape
        m2, c = other.shape
        if m != m2:
            raise ValueError("shape mismatch")
        N = self.N + other.N
        out = np.zeros((r, c, 2 * N + 1), dtype=complex)
        for i in range(r):
            for j in range(c):
                for l in range(m):
                    out[i, j] += np.convolve(self.coeffs[i, l], other.coeffs[l, j])
        return TrigMat(out, self.period)

    def column(self, j):
        return TrigMat(self.coeffs[:, j:j + 1], self.period)

    def det_grid(self, n=None):
        n = n or max(4 * (2 * self.N + 1), 64)
        v = self.grid(n)
        return v[:, 0, 0] * v[:, 1, 1] - v[:, 0, 1] * v[:, 1, 0]

    def adjugate(self):
        """Inverse for det = 1 (2 x 2 adjugate)."""
        c = self.coeffs
        out = np.empty_like(c)
        out[0, 0], out[1, 1] = c[1, 1], c[0, 0]
        out[0, 1], out[1, 0] = -c[0, 1], -c[1, 0]
        return TrigMat(out, self.period)

    def sup_norm(self, n=None):
        n = n or max(8 * (2 * self.N + 1), 64)
        return float(np.max(np.linalg.norm(self.grid(n), ord=2, axis=(1, 2))))

    def decay_rate(self, floor=1e-14):
        a = np.max(np.abs(self.coeffs), axis=(0, 1))
        return TrigSeries(a.astype(complex), self.period).decay_rate(floor)

    def tail_energy(self, frac=0.25):
        a = np.sum(np.abs(self.coeffs) ** 2, axis=(0, 1))
        return TrigSeries(np.sqrt(a).astype(complex), self.period).tail_energy(frac)

    def to_json(self, tol=0.0):
        r, c = self.shape
        return {"period": self.period,
                "entries": [[self.entry(i, j).to_json(tol) for j in range(c)]
                            for i in range(r)]}

    @classmethod
    def from_json(cls, obj):
        period = int(obj["period"])
        rows = [[TrigSeries.from_json(e, period) for e in row] for row in obj["entries"]]
        return cls.from_entries(rows, period)

    def __repr__(self):
        return f"TrigMat(shape={self.shape}, N={self.N}, period={self.period})"


# ----------------------------------------------------------------------------
# pointwise 2x2 helpers on arrays of shape (..., 2, 2)

def det2(M):
    return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]


def inv2(M):
    d = det2(M)
    out = np.empty_like(M)
    out[..., 0, 0] = M[..., 1, 1]
    out[..., 1, 1] = M[..., 0, 0]
    out[..., 0, 1] = -M[..., 0, 1]
    out[..., 1, 0] = -M[..., 1, 0]
    return out / d[..., None, None]


def rot(theta):
    """R_theta = [[cos 2 pi theta, -sin 2 pi theta], [sin 2 pi theta, cos 2 pi theta]]."""
    c, s = np.cos(2 * np.pi * np.asarray(theta)), np.sin(2 * np.pi * np.asarray(theta))
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


_PADE6 = [math.factorial(12 - j) * math.factorial(6)
          / (math.factorial(12) * math.factorial(j) * math.factorial(6 - j))
          for j in range(7)]


def expm2(X):
    """Matrix exponential of (..., 2, 2) arrays: Pade(6,6) + scaling and squaring."""
    X = np.asarray(X)
    nrm = np.max(np.sum(np.abs(X), axis=-2), axis=-1)
    s = int(max(0, math.ceil(math.log2(max(float(np.max(nrm)), 1e-300))) + 1))
    A = X / 2.0 ** s
    I = np.broadcast_to(np.eye(2, dtype=A.dtype), A.shape)
    P = I.copy()
    num = _PADE6[0] * I
    den = _PADE6[0] * I
    for j in range(1, 7):
        P = P @ A
        num = num + _PADE6[j] * P
        den = den + (-1) ** j * _PADE6[j] * P
    R = np.linalg.solve(den, num)
    for _ in range(s):
        R = R @ R
    return R
