import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaplab.trig import TrigMat, TrigSeries, det2, expm2, inv2, rot


def random_series(rng, N, period=1, decay=0.5):
    ks = np.arange(-N, N + 1)
    c = (rng.normal(size=2 * N + 1) + 1j * rng.normal(size=2 * N + 1)) * np.exp(-decay * abs(ks))
    return TrigSeries(c, period)


def test_grid_matches_direct_evaluation():
    rng = np.random.default_rng(0)
    f = random_series(rng, 12, period=2)
    n = 64
    x = 2 * np.arange(n) / n
    assert np.allclose(f.grid(n), f(x), atol=1e-13)


def test_from_grid_roundtrip():
    rng = np.random.default_rng(1)
    f = random_series(rng, 10)
    g = TrigSeries.from_grid(f.grid(64), 1, 10)
    assert np.allclose(g.coeffs, f.coeffs, atol=1e-14)


def test_shift_is_translation():
    rng = np.random.default_rng(2)
    f = random_series(rng, 8)
    x = np.linspace(0, 1, 17)
    assert np.allclose(f.shift(0.3)(x), f(x + 0.3), atol=1e-13)


def test_product_matches_pointwise():
    rng = np.random.default_rng(3)
    f, g = random_series(rng, 6), random_series(rng, 5)
    x = np.linspace(0, 1, 23)
    assert np.allclose((f * g)(x), f(x) * g(x), atol=1e-12)


def test_real_part_and_conj():
    rng = np.random.default_rng(4)
    f = random_series(rng, 7)
    x = np.linspace(0, 1, 11)
    assert np.allclose(f.real_part()(x), f(x).real, atol=1e-13)
    assert np.allclose(f.conj()(x), np.conj(f(x)), atol=1e-13)
    assert f.real_part().is_real()


def test_trim_drops_small_tail():
    c = np.zeros(21, dtype=complex)
    c[10], c[11], c[0] = 1.0, 0.5, 1e-20
    f = TrigSeries(c).trim(1e-18)
    assert f.N == 1


def test_json_roundtrip():
    rng = np.random.default_rng(5)
    M = TrigMat(rng.normal(size=(2, 2, 9)) + 0j, 2)
    back = TrigMat.from_json(M.to_json())
    assert back.period == 2
    assert np.allclose(back.padded(M.N).coeffs, M.coeffs)


def test_matmul_and_det_grid():
    x = np.arange(32) / 32
    R = TrigMat.from_function(lambda t: rot(t), 2)
    assert np.allclose(R.det_grid(32), 1.0, atol=1e-12)
    RR = R @ R
    assert np.allclose(RR(x), rot(2 * x), atol=1e-12)


def test_pointwise_helpers():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(5, 2, 2))
    X[:, 1, 1] = -X[:, 0, 0]
    B = expm2(X)
    assert np.allclose(det2(B), 1.0, atol=1e-12)
    assert np.allclose(inv2(B) @ B, np.eye(2), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_expm2_matches_series(a, b, c):
    from scipy.linalg import expm
    X = np.array([[a, b], [c, -a]])
    assert np.allclose(expm2(X[None])[0], expm(X), rtol=1e-10, atol=1e-10)
