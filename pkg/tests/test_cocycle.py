import math
from fractions import Fraction

import numpy as np
import pytest

from gaplab.cocycle import (CocycleSpec, amo_matrix, conjugate_cocycle, degree,
                            lyapunov, rotation_number, rotation_numbers, transfer_product,
                            uniform_hyperbolicity_test)
from gaplab.spectrum import spectrum_rational
from gaplab.trig import TrigMat, det2, rot


def product_matrix(P):
    return math.exp(P.log_mag) * P.unit


def test_free_cocycle_traces(gold30):
    rho0 = 0.137
    E = 2 * math.cos(2 * math.pi * rho0)
    for n in (1, 7, 50):
        M = product_matrix(transfer_product(CocycleSpec(0.0, E, gold30), 0.3, n))
        assert np.trace(M) == pytest.approx(2 * math.cos(2 * math.pi * n * rho0), abs=1e-10)


def test_single_step_is_the_matrix(gold30):
    x = 0.41
    M = product_matrix(transfer_product(CocycleSpec(0.7, 0.3, gold30), x, 1))
    assert np.allclose(M, amo_matrix(0.7, 0.3)(np.array([x]))[0])


def test_determinant_one():
    M = product_matrix(transfer_product(CocycleSpec(0.8, 0.4, Fraction(5, 8)), 0.2, 8))
    assert abs(np.linalg.det(M) - 1) < 1e-12


def test_lyapunov_supercritical(gold30):
    spec = spectrum_rational(2.0, Fraction(34, 55))
    E = 0.5 * (spec.bands[20].lo + spec.bands[20].hi)
    est = lyapunov(CocycleSpec(2.0, E, gold30), 20_000)
    assert abs(est.mean - math.log(2)) < 0.02
    assert est.max >= est.mean


def test_complexified_above_eta(gold30):
    eta = math.log(2) / (2 * math.pi)
    est = lyapunov(CocycleSpec(0.5, 0.1, gold30, eta + 0.05), 20_000)
    assert abs(est.mean - 2 * math.pi * 0.05) < 0.02


def test_rotation_free_and_outside(gold30):
    assert rotation_number(CocycleSpec(0.0, 0.0, gold30), 20_000) == pytest.approx(0.25, abs=1e-3)
    rho = rotation_numbers(0.5, [-3.5, 3.5], gold30, 20_000)
    assert rho[0] == pytest.approx(0.5, abs=1e-3)
    assert rho[1] == pytest.approx(0.0, abs=1e-3)


def test_uniform_hyperbolicity(gold30):
    rep = uniform_hyperbolicity_test(CocycleSpec(0.5, 10.0, gold30))
    assert rep.verdict is True
    assert abs(rep.growth_rate - math.log(10)) < 0.15 * math.log(10)
    rep = uniform_hyperbolicity_test(CocycleSpec(0.0, 3.0, gold30))
    assert rep.verdict is True
    assert rep.growth_rate == pytest.approx(math.log((3 + math.sqrt(5)) / 2), abs=1e-3)
    spec = spectrum_rational(0.5, Fraction(3, 5))
    mid = 0.5 * (spec.bands[2].lo + spec.bands[2].hi)
    assert uniform_hyperbolicity_test(CocycleSpec(0.5, mid, Fraction(3, 5))).verdict is False


def half_turn(k):
    return TrigMat.from_function(lambda x: rot(k * x / 2), abs(k) + 2, period=2)


def test_conjugation_identity_and_rotation(gold30):
    a = gold30.value
    A = TrigMat.constant(rot(0.2))
    I = TrigMat.identity()
    assert np.allclose(conjugate_cocycle(I, A, gold30).mean(), rot(0.2), atol=1e-12)
    C = conjugate_cocycle(half_turn(3), A, gold30)
    x = np.linspace(0, 2, 9)
    assert np.allclose(C(x), rot(0.2 - 3 * a / 2), atol=1e-10)


def test_conjugate_back(gold30):
    rng = np.random.default_rng(0)
    c = rng.normal(size=(2, 2, 5)) * 0.2
    c[:, :, 2] += np.eye(2)
    B = TrigMat(c + 0j)
    A = amo_matrix(0.3, 0.7)
    C = conjugate_cocycle(B, A, gold30)
    x = (np.arange(16) + 0.5) / 16
    a = gold30.value
    back = B.shift(a)(x) @ C(x) @ np.linalg.inv(B(x))
    assert np.allclose(back, A(x), atol=1e-9)


def test_degree():
    for k in (-3, -1, 1, 2, 5):
        assert degree(half_turn(k)) == k
    assert degree(TrigMat.constant(rot(0.3))) == 0
    assert degree(half_turn(2) @ half_turn(3)) == 5
