import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.linalg import eigvalsh

from gaplab.spectrum import (approximant, band_samples, butterfly, discriminant, gap_label,
                             gap_labels, hausdorff_distance, holder_scan, ids_sturm,
                             lebesgue_measure, scaled, spectrum_rational, theta_harmonics)


def periodic_eigenvalues(lam, pq, thetas, m):
    """Eigenvalues of the periodic truncation of length m q (a subset of the spectrum)."""
    p, q = pq.numerator, pq.denominator
    L = m * q
    out = []
    for th in thetas:
        H = np.diag(2 * lam * np.cos(2 * np.pi * (th + np.arange(L) * p / q)))
        H += np.diag(np.ones(L - 1), 1) + np.diag(np.ones(L - 1), -1)
        H[0, -1] = H[-1, 0] = 1.0
        out.append(eigvalsh(H))
    return np.concatenate(out)


def in_spectrum(E, spec, tol):
    return any(b.lo - tol <= E <= b.hi + tol for b in spec.bands)


def test_discriminant_trivial_cases():
    E = np.linspace(-3, 3, 7)
    assert np.allclose(discriminant(E, 0.3, 0.0, Fraction(0, 1)), E)
    th = 0.17
    assert np.allclose(discriminant(E, th, 0.7, Fraction(0, 1)),
                       E - 1.4 * np.cos(2 * np.pi * th))


def test_chambers_harmonics_q5():
    for E in (-1.3, 0.2, 2.1):
        c, n = theta_harmonics(E, 0.6, Fraction(2, 5))
        keep = np.zeros(n, dtype=bool)
        keep[[0, 5, n - 5]] = True
        assert np.max(np.abs(c[~keep])) < 1e-12
        assert abs(2 * abs(c[5]) - 2 * 0.6 ** 5) < 1e-9


@pytest.mark.parametrize("lam,pq", [(0.5, Fraction(1, 2)), (0.5, Fraction(3, 5)),
                                    (1.3, Fraction(5, 8))])
def test_bands_against_periodic_truncations(lam, pq):
    spec = spectrum_rational(lam, pq)
    ev = periodic_eigenvalues(lam, pq, np.arange(64) / 64 / pq.denominator, 40)
    assert all(in_spectrum(E, spec, 1e-9) for E in ev)
    for b in spec.bands:
        for edge in (b.lo, b.hi):
            assert np.min(np.abs(ev - edge)) < 5e-3


def test_half_frequency_symmetric_bands():
    spec = spectrum_rational(0.5, Fraction(1, 2))
    assert len(spec.bands) == 2
    (a, b), (c, d) = spec.intervals()
    assert a == pytest.approx(-d, abs=1e-12) and b == pytest.approx(-c, abs=1e-12)


def test_bands_inside_norm_bound():
    for lam in (0.3, 1.0, 2.5):
        spec = spectrum_rational(lam, Fraction(5, 13))
        assert spec.bands[0].lo >= -2 - 2 * lam - 1e-12
        assert spec.bands[-1].hi <= 2 + 2 * lam + 1e-12


def test_critical_half_central_gap_closed():
    spec = gap_labels(spectrum_rational(1.0, Fraction(1, 2)), check=False)
    assert len(spec.gaps) == 1
    assert not spec.gaps[0].open
    assert spec.gaps[0].lo == pytest.approx(0.0, abs=1e-10)


def test_gap_label_table():
    assert gap_label(1, 2, 5) == -2
    for p, q in [(3, 5), (5, 8), (8, 13)]:
        for j in range(1, q):
            l = gap_label(j, p, q)
            assert (l * p - j) % q == 0 and abs(l) <= q / 2


def test_gap_ids_values():
    spec = gap_labels(spectrum_rational(0.5, Fraction(3, 5)), check=True)
    assert [g.ids_value for g in spec.gaps] == [Fraction(j, 5) for j in range(1, 5)]
    assert len(spec.bands) == 5 and all(g.open for g in spec.gaps)


def test_ids_sturm_limits_and_gap():
    pq = Fraction(3, 5)
    assert ids_sturm(-3.5, 0.5, pq) == 0
    assert ids_sturm(3.5, 0.5, pq) == 1
    spec = spectrum_rational(0.5, pq)
    mid = 0.5 * (spec.bands[0].hi + spec.bands[1].lo)
    M = 400
    assert abs(ids_sturm(mid, 0.5, pq, M=M) - 0.2) <= 2 / M + 1e-3


def test_hausdorff_basic():
    S = [(0.0, 1.0), (2.0, 3.0)]
    assert hausdorff_distance(S, S) == 0
    assert hausdorff_distance(S, [(a + 0.01, b + 0.01) for a, b in S]) == pytest.approx(0.01)
    assert lebesgue_measure(S) == pytest.approx(2.0)
    assert scaled(S, -1) == [(-3.0, -2.0), (-1.0, -0.0)] or lebesgue_measure(scaled(S, -1)) == 2.0


def test_holder_bound_between_convergents():
    a, b = Fraction(5, 8), Fraction(8, 13)
    d = hausdorff_distance(spectrum_rational(1.0, a), spectrum_rational(1.0, b))
    assert d <= 10 * math.sqrt(abs(float(a - b)))


def test_holder_scan(gold30):
    rows, expo = holder_scan(gold30, 21)
    assert len(rows) >= 3 and expo > 0.4


def test_butterfly_rows():
    rows = butterfly(3)
    assert {(p, q) for p, q, *_ in rows} == {(0, 1), (1, 2), (1, 3), (2, 3)}
    assert sum(1 for r in rows if r[1] == 3) == 6


def test_samples_inside_bands(gold30):
    spec = spectrum_rational(0.5, approximant(gold30, 89))
    assert spec.q == 89
    assert all(in_spectrum(E, spec, 0) for E in band_samples(spec, 50, seed=3))


def test_json_roundtrip():
    from gaplab.spectrum import Spectrum
    spec = gap_labels(spectrum_rational(0.5, Fraction(3, 5)), check=False)
    back = Spectrum.from_json(spec.to_json())
    assert back.intervals() == spec.intervals()
    assert [g.label for g in back.gaps] == [g.label for g in spec.gaps]
