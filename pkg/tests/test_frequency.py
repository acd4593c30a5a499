import math
from fractions import Fraction

import pytest

from gaplab.frequency import (IrrationalFrequency, PrecisionExhausted, beta_estimate,
                              build_frequency, golden, parse_alpha, parse_digits,
                              resonances, smallest_divisor, synth_beta_frequency,
                              torus_distance)


def fib(n):
    a, b = 1, 1
    out = []
    for _ in range(n):
        out.append(a)
        a, b = b, a + b
    return out


def test_golden_denominators_are_fibonacci():
    g = golden(20)
    assert g.denominators() == fib(21)


def test_sqrt2_digits_all_two():
    f = build_frequency(real_sample=math.sqrt(2) - 1)
    assert f.n_digits >= 10
    assert set(f.digits) == {2}


def test_one_third_terminates():
    f = build_frequency(real_sample=1 / 3)
    assert f.rational == Fraction(1, 3)
    assert f.digits == (3,)


def test_distance_at_denominators_is_bracketed(gold30):
    conv = gold30.convergents
    for n in range(2, 15):
        q, q_next = conv[n][1], conv[n + 1][1]
        d = torus_distance(q, gold30)
        assert 1 / (2 * q_next) <= d <= 1 / q_next


def test_golden_distance_k1(gold30):
    assert torus_distance(1, gold30) == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-12)


def test_precision_exhausted_for_huge_k():
    with pytest.raises(PrecisionExhausted):
        torus_distance(10 ** 9, golden(10))


def test_zero_k_rejected(gold30):
    with pytest.raises(ValueError):
        torus_distance(0, gold30)


def test_beta_estimates():
    assert beta_estimate(golden(30), 10) <= 0.01
    assert beta_estimate(IrrationalFrequency((2,) * 30), 10) <= 0.01
    b1 = beta_estimate(synth_beta_frequency(1.0, 12, 0))
    assert 0.9 <= b1 <= 1.1
    b5 = beta_estimate(synth_beta_frequency(0.5, 12, 0))
    assert 0.45 <= b5 <= 0.55


def test_synth_is_deterministic_and_degenerates():
    assert synth_beta_frequency(0.5, 12, 3).digits == synth_beta_frequency(0.5, 12, 3).digits
    small = synth_beta_frequency(1e-3, 12, 0)
    assert max(small.digits) <= 3


def test_smallest_divisor(gold30):
    conv = gold30.convergents
    for n in range(3, 12):
        qn, qm = conv[n][1], conv[n - 1][1]
        assert smallest_divisor(qn - 1, gold30) == pytest.approx(torus_distance(qm, gold30),
                                                                 abs=1e-15)
    assert smallest_divisor(1, gold30) == pytest.approx(torus_distance(1, gold30))
    a = gold30.value
    brute = min(abs(k * a - round(k * a)) for k in range(1, 101))
    assert smallest_divisor(100, gold30) == pytest.approx(brute, abs=1e-12)


def test_resonance_at_half_alpha(gold60):
    p, q = gold60.convergents[-1]
    rep = resonances(Fraction(p, q) / 2, 0.5, 2000, gold60)
    assert rep.sites == [0, 1]
    assert rep.entries[1][1] == 0.0


def test_theta_zero_only_trivial(gold60):
    beta = beta_estimate(gold60)
    rep = resonances(0, max(2 * beta, 0.5) + 0.1, 2000, gold60)
    assert rep.sites == [0]


def test_doubling_K_extends_list(gold60):
    short = resonances(0.1234, 0.05, 500, gold60).entries
    long = resonances(0.1234, 0.05, 1000, gold60).entries
    assert long[:len(short)] == short


def test_parse_alpha_forms():
    assert parse_alpha("3/5") == Fraction(3, 5)
    assert parse_alpha("golden:12").digits == (1,) * 12
    assert parse_alpha("silver:5").digits == (2,) * 5
    assert parse_alpha("1x3,2x2").digits == (1, 1, 1, 2, 2)
    assert parse_digits("1x2,3") == [1, 1, 3]
    with pytest.raises(ValueError):
        parse_alpha("nonsense")


def test_json_roundtrip(gold30):
    assert IrrationalFrequency.from_json(gold30.to_json()) == gold30
