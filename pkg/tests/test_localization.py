import math

import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal

from gaplab.cocycle import CocycleSpec, transfer_product
from gaplab.frequency import synth_beta_frequency
from gaplab.localization import (classify_regular, dual_eigenpairs, dual_operator,
                                 expansion_residual, gamma_uniform_test, green_entries,
                                 green_table, phases, pk_determinant,
                                 polynomial_grid_bound_check, sin_sum_check,
                                 strong_windows, uniform_set, verify_strong_localization)
from gaplab.trig import TrigSeries


@pytest.fixture(scope="module")
def pairs_01(request):
    from gaplab.frequency import golden
    return dual_eigenpairs(0.05, golden(40), 0.1, 400)


def test_weak_coupling_limit(gold30):
    lam, theta, M = 1e-7, 0.23, 30
    pairs = dual_eigenpairs(lam, gold30, theta, M, resonance=False)
    diag, _ = dual_operator(lam, gold30, theta, M)
    assert np.allclose(np.sort([p.E for p in pairs]), np.sort(diag), atol=1e-6)
    for p in pairs[5:-5]:
        others = p.log_abs[p.ks != 0]
        assert np.max(others) < math.log(1e-5)


def test_decay_rate_mid_spectrum(pairs_01):
    L = -math.log(0.05)
    mid = [p for p in pairs_01 if p.clean and abs(p.E) < 0.5]
    assert mid
    for p in mid[:20]:
        assert 0.9 * L <= p.decay_rate <= 1.1 * L


def test_eigenpair_residuals(pairs_01):
    assert max(p.residual for p in pairs_01) < 1e-10


def test_covariance_under_shift():
    from gaplab.frequency import golden
    g = golden(40)
    a = g.value
    E1 = np.sort([p.E for p in dual_eigenpairs(0.05, g, 0.1, 300) if p.clean])
    E2 = np.sort([p.E for p in dual_eigenpairs(0.05, g, 0.1 + a, 300) if p.clean])
    common = E1[(E1 > -1.5) & (E1 < 1.5)]
    assert all(np.min(np.abs(E2 - e)) < 1e-10 for e in common)


def test_strong_localization_golden(pairs_01):
    L = -math.log(0.05)
    fitted = 0
    for p in [q for q in pairs_01 if q.clean][:50]:
        rep = verify_strong_localization(p)
        assert rep.verdict is True
        assert rep.C <= 1e3
        # windows shorter than three radii carry no rate
        if not math.isnan(rep.min_rate):
            fitted += 1
            assert rep.min_rate >= 0.8 * L
    assert fitted > 0


def test_outside_regime_is_report_only():
    alpha = synth_beta_frequency(0.3, 12, 0)
    pairs = dual_eigenpairs(0.05, alpha, 0.1, 200)
    rep = verify_strong_localization(next(p for p in pairs if p.clean))
    assert rep.in_regime is False
    assert rep.verdict is None


def test_strong_windows():
    w = strong_windows([0, 5, 100], 1000, 3.0)
    assert w[0][:2] == (0, 5 / 3)
    assert w[1][:2] == (15, 100 / 3)
    assert w[2][0] == 300 and w[2][1] == 1001
    assert strong_windows([0, 5, 8], 50)[1][2] == "empty window"


def test_pk_small_cases(gold30):
    E, th, lam = 0.37, 0.21, 0.8
    assert pk_determinant(0, th, E, lam, gold30).value == 1.0
    assert pk_determinant(1, th, E, lam, gold30).value == pytest.approx(
        E - 2 * lam * math.cos(2 * math.pi * th))


def test_pk_trace_identity(gold30):
    E, th, lam = 0.37, 0.21, 0.8
    a = gold30.value
    for k in (3, 8, 20):
        P = transfer_product(CocycleSpec(lam, E, gold30), th, k)
        tr = math.exp(P.log_mag) * np.trace(P.unit)
        val = pk_determinant(k, th, E, lam, gold30).value \
            - pk_determinant(k - 2, th + a, E, lam, gold30).value
        assert val == pytest.approx(tr, rel=1e-9)


def test_pk_transfer_norm_bound(gold30):
    E, th, lam = 0.5, 0.1, 1.5
    for k in (10, 40):
        P = transfer_product(CocycleSpec(lam, E, gold30), th, k)
        lognorm = P.log_mag + math.log(np.linalg.norm(P.unit, 2))
        assert pk_determinant(k, th, E, lam, gold30).log_abs <= lognorm + 1e-9


def test_green_scalar_case(gold30):
    E, th, lam = 0.3, 0.17, 0.9
    row = green_entries((4, 4), 4, E, th, lam, gold30)
    v = 2 * lam * math.cos(2 * math.pi * phases(gold30, th, 4, 4)[0])
    assert row.g_x1 == pytest.approx(abs(1 / (E - v)))
    assert row.direct_x1 == pytest.approx(1 / (v - E))


def test_green_cramer_vs_direct(gold30):
    rng = np.random.default_rng(0)
    for _ in range(10):
        x1 = int(rng.integers(-50, 50))
        I = (x1, x1 + int(rng.integers(2, 40)))
        E, th = rng.uniform(-2, 2), rng.uniform(0, 1)
        ys, g1, g2, d1, d2 = green_table(I, E, th, 0.7, gold30)
        assert np.allclose(g1, np.abs(d1), rtol=1e-8)
        assert np.allclose(g2, np.abs(d2), rtol=1e-8)


def test_expansion_identity(gold30):
    lam, th, lo, n = 1.4, 0.3, -40, 81
    v = 2 * lam * np.cos(2 * np.pi * phases(gold30, th, lo, lo + n - 1))
    w, V = eigh_tridiagonal(v, np.ones(n - 1))
    j = n // 2
    res = expansion_residual(V[:, j], lo, (-10, 12), w[j], th, lam, gold30)
    assert res < 1e-8


def test_regularity(gold30):
    lam, th = 2.0, 0.1
    with pytest.raises(ValueError):
        classify_regular(0, 1.0, 20, 0.05, 0.0, th, lam, gold30)
    with pytest.raises(ValueError):
        classify_regular(0, 1.0, 20, 0.6, 0.0, th, lam, gold30)
    # energy deep in a gap: the Green function decays at about the gap's rate
    E = 10.0
    verdict = classify_regular(0, 1.5, 40, 0.2, E, th, lam, gold30)
    assert verdict.regular
    # a generalized eigenvector vanishing at y: y is singular
    lo, n = -60, 121
    v = 2 * lam * np.cos(2 * np.pi * phases(gold30, th, lo, lo + n - 1))
    w, V = eigh_tridiagonal(v, np.ones(n - 1))
    j = int(np.argmax(np.abs(V[n // 2])))
    peak = lo + int(np.argmax(np.abs(V[:, j])))
    verdict = classify_regular(peak, 0.5 * math.log(lam), 30, 0.2, w[j], th, lam, gold30)
    assert not verdict.regular


def test_gamma_uniformity():
    k = 12
    cheb = np.cos(np.pi * (2 * np.arange(k + 1) + 1) / (2 * (k + 1)))
    thetas = np.arccos(cheb) / (2 * np.pi)
    rep = gamma_uniform_test(thetas, 0.5)
    assert rep.verdict and rep.gamma_fit < 0.3
    close = thetas.copy()
    close[1] = close[0] + 1e-9
    assert not gamma_uniform_test(close, 0.5).verdict


def test_uniform_set_shape(gold30):
    js, ph, s, q = uniform_set(0.1, 400, gold30)
    assert q <= 50 < gold30.denominators()[gold30.denominators().index(q) + 1]
    assert s >= 1 and js.size == ph.size


def test_sin_sum(gold30):
    assert sin_sum_check(0.3, 1, gold30).value == 0.0
    qs = gold30.denominators()
    n = qs.index(55)
    rng = np.random.default_rng(0)
    for x in rng.uniform(0, 1, 100):
        assert abs(sin_sum_check(x, n, gold30).ratio) <= 3
    assert math.isfinite(sin_sum_check(0.0, n, gold30).value)


def test_polynomial_grid_bound(gold30):
    qs = gold30.denominators()
    n = qs.index(34)
    assert polynomial_grid_bound_check({0: 2.0}, 0.1, 1, n, gold30).ratio == pytest.approx(1.0)
    rng = np.random.default_rng(1)
    for _ in range(5):
        c = {j: complex(*rng.normal(size=2)) for j in range(-16, 17)}
        assert polynomial_grid_bound_check(c, rng.uniform(), 1, n, gold30).ratio <= 10
    with pytest.raises(ValueError):
        polynomial_grid_bound_check({0: 1, 40: 1}, 0.1, 1, n, gold30)
