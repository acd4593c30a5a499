import math

import numpy as np
import pytest

from gaplab.cocycle import amo_matrix, conjugate_cocycle
from gaplab.frequency import beta_estimate, golden
from gaplab.localization import dual_eigenpairs
from gaplab.reducibility import (E11, ParabolicForm, SmallDivisorError, bloch_vector,
                                 complete_to_sl2, dexp_inverse, gap_certificate,
                                 kam_step, kam_step_general, matrix_homological_solve,
                                 modulate, parity_class, PipelineError, rational_edge_certificate,
                                 realify, reduce_pipeline, rotation_residual,
                                 scalar_homological_solve, solve_recursion, to_period1,
                                 to_period2, wronskian)
from gaplab.trig import TrigMat, TrigSeries, expm2, rot

EDGE = -0.7757219870081623  # a gap edge of the lam = 0.05 dual problem, golden:30


@pytest.fixture(scope="module")
def edge_run(gold30_module):
    return reduce_pipeline(0.05, gold30_module, EDGE, n_rho=20_000)


@pytest.fixture(scope="module")
def gold30_module():
    return golden(30)


def analytic_series(rng, N, decay, period=1):
    ks = np.arange(-N, N + 1)
    c = (rng.normal(size=2 * N + 1) + 1j * rng.normal(size=2 * N + 1)) * np.exp(-decay * abs(ks))
    return TrigSeries(c, period)


# ----------------------------------------------------------------------------
# lattice helpers

def test_period_doubling_roundtrip():
    rng = np.random.default_rng(0)
    M = TrigMat(rng.normal(size=(2, 1, 9)) + 0j)
    M2 = to_period2(M)
    x = np.linspace(0, 1, 7)
    assert np.allclose(M2(x), M(x))
    assert np.allclose(to_period1(M2).coeffs, M.coeffs)
    odd = modulate(M2, 1)
    assert parity_class(odd) == "odd"
    assert parity_class(M2) == "even"
    with pytest.raises(ValueError):
        to_period1(odd)


# ----------------------------------------------------------------------------
# Bloch vectors

def test_bloch_full_support_has_no_defect(gold30):
    pairs = dual_eigenpairs(0.05, gold30, 0.1, 60, resonance=False)
    p = pairs[60]
    bv = bloch_vector(p)
    assert bv.g.sup_norm() < 1e-12
    assert bv.identity_residual < 1e-12


def test_bloch_defect_sites_and_shrinking(gold30):
    pairs = dual_eigenpairs(0.05, gold30, 0.1, 60, resonance=False)
    p = pairs[60]
    x1, x2 = -20, 20
    bv = bloch_vector(p, (x1, x2))
    assert bv.defect_sites == [x1 - 1, x1, x2, x2 + 1]
    bv2 = bloch_vector(p, (x1 + 1, x2))
    u = p.coeffs
    dropped = abs(u[x1 - p.lo])
    assert abs(bv2.g.sup_norm() - bv.g.sup_norm()) <= 2.5 * dropped + 2 * 0.05 * dropped + 1e-15


# ----------------------------------------------------------------------------
# completion, realification

def test_complete_rotation_column():
    W = TrigMat.from_function(lambda x: rot(x / 2)[:, :, :1], 2, period=2)
    c = complete_to_sl2(W)
    x = np.linspace(0, 2, 13)
    assert np.allclose(c.B(x).real, rot(x / 2), atol=1e-12)
    assert c.det_residual < 1e-12


def test_complete_constant_column():
    W = TrigMat.constant(np.array([[1.0], [0.0]]))
    c = complete_to_sl2(W)
    assert np.allclose(c.B.mean().real, np.eye(2), atol=1e-14)


def test_realify_rejects_real_column():
    U = TrigMat.constant(np.array([[1.0], [2.0]]) + 0j)
    with pytest.raises(ArithmeticError):
        realify(U, 0.1)


def test_realify_explicit():
    # U = (e^{2 pi i x}, i e^{2 pi i x})/sqrt 2: S = (cos, -sin)/sqrt2, T = (sin, cos)/sqrt2
    c = np.zeros((2, 1, 3), dtype=complex)
    c[0, 0, 2] = 1 / math.sqrt(2)
    c[1, 0, 2] = 1j / math.sqrt(2)
    r = realify(TrigMat(c), 0.1)
    x = np.linspace(0, 1, 9)
    cs, sn = np.cos(2 * np.pi * x), np.sin(2 * np.pi * x)
    assert np.allclose(r.S(x)[:, :, 0].real, np.stack([cs, -sn], 1) / math.sqrt(2))
    assert np.allclose(r.T(x)[:, :, 0].real, np.stack([sn, cs], 1) / math.sqrt(2))
    assert r.det_value == pytest.approx(0.5)
    assert r.det_variation < 1e-14
    dW = np.linalg.det(r.W(x).real)
    assert np.allclose(dW, 1, atol=1e-8)


def test_realify_sign_flip():
    c = np.zeros((2, 1, 3), dtype=complex)
    c[0, 0, 2] = 1
    c[1, 0, 2] = -1j
    r = realify(TrigMat(c), 0.1)
    assert r.sign == -1
    assert np.allclose(np.linalg.det(r.W(np.linspace(0, 1, 5)).real), 1, atol=1e-8)


def test_rotation_residual_trivial(gold30):
    A = lambda x: np.broadcast_to(rot(0.3), np.shape(x) + (2, 2))
    W = TrigMat.identity()
    assert rotation_residual(W, A, gold30, 0.3) < 1e-15


# ----------------------------------------------------------------------------
# homological equations

def test_scalar_cosine(gold30):
    a = gold30.value
    k = TrigSeries.from_modes({1: 0.5, -1: 0.5})
    sol = scalar_homological_solve(k, gold30)
    phi = dict(zip(sol.phi.ks, sol.phi.coeffs))
    for s in (1, -1):
        assert phi[s] == pytest.approx(-0.5 / (1 - np.exp(2j * np.pi * s * a)))
    # the same function on the R/2Z lattice sits at indices +-2
    k2 = TrigSeries.from_modes({2: 0.5, -2: 0.5}, period=2)
    sol2 = scalar_homological_solve(k2, gold30)
    assert dict(zip(sol2.phi.ks, sol2.phi.coeffs))[2] == pytest.approx(phi[1])


def test_scalar_constant_and_residuals(gold30):
    sol = scalar_homological_solve(TrigSeries.constant(3.0, 4), gold30)
    assert np.all(sol.phi.coeffs == 0) and sol.mean == 3.0
    rng = np.random.default_rng(0)
    for sign in (1, -1):
        sol = scalar_homological_solve(analytic_series(rng, 200, 0.1), gold30, sign=sign)
        assert sol.grid_residual < 1e-12 and sol.rel_residual < 1e-14


def test_scalar_decay(gold30):
    rng = np.random.default_rng(1)
    beta = beta_estimate(gold30)
    sol = scalar_homological_solve(analytic_series(rng, 60, 0.5), gold30)
    assert sol.phi.decay_rate() >= 0.5 - 6 * beta - 0.05


def test_small_divisor_error():
    from fractions import Fraction
    with pytest.raises(SmallDivisorError) as exc:
        scalar_homological_solve(TrigSeries.from_modes({5: 1.0}), Fraction(2, 5))
    assert 5 in exc.value.ks


def test_matrix_trivial(gold30):
    Z = ParabolicForm(1, 0.3)
    zero = TrigMat(np.zeros((2, 2, 5), dtype=complex))
    assert np.all(matrix_homological_solve(Z, zero, gold30).Y.coeffs == 0)
    const = TrigMat.constant(np.array([[0.2, 1.0], [0.4, -0.2]]) + 0j, 3)
    sol = matrix_homological_solve(Z, const, gold30)
    assert np.max(np.abs(sol.Y.coeffs)) == 0


@pytest.mark.parametrize("sign", [1, -1])
def test_matrix_random(gold30, sign):
    rng = np.random.default_rng(2)
    N = 60
    ks = np.arange(-N, N + 1)
    T = (rng.normal(size=(2, 2, 2 * N + 1)) + 1j * rng.normal(size=(2, 2, 2 * N + 1))) \
        * np.exp(-0.5 * abs(ks))
    T[1, 1] = -T[0, 0]
    sol = matrix_homological_solve(ParabolicForm(sign, 0.7), TrigMat(T), gold30)
    assert sol.rel_residual < 1e-14 and sol.rel_grid_residual < 1e-13
    assert sol.trace_residual < 1e-14
    beta = beta_estimate(gold30)
    assert sol.Y.decay_rate() >= 0.5 - 3 * 2 * beta - 0.05


# ----------------------------------------------------------------------------
# KAM step and gap certificate

def synthetic(a=0.3, N=48):
    n = 8 * (2 * N + 1)
    x = np.arange(n) / n
    X = np.zeros((n, 2, 2))
    X[:, 0, 0] = 0.2 * np.cos(2 * np.pi * x)
    X[:, 1, 1] = -X[:, 0, 0]
    X[:, 0, 1] = 0.3 * np.sin(2 * np.pi * x)
    X[:, 1, 0] = 0.1 * np.cos(4 * np.pi * x)
    B = expm2(X)
    Z = ParabolicForm(1, a)
    K = np.array([[0.0, 1.0], [0.0, 0.0]])
    P = TrigMat.from_grid(Z.matrix @ np.linalg.inv(B) @ K @ B, 1, N)
    return Z, P


def test_kam_zero_eps(gold30):
    Z, P = synthetic()
    rep = kam_step_general(Z, P, gold30, [0.0])
    assert rep.residuals == [0.0]


def test_kam_second_order(gold30):
    Z, P = synthetic()
    rep = kam_step_general(Z, P, gold30, [1e-3, 5e-4])
    assert 3.5 <= rep.ratio <= 4.5


def test_kam_on_pipeline_output(edge_run, gold30):
    r = edge_run
    rep = kam_step(r.B, 0.05, r.E, gold30, (1e-3, 5e-4), Z=r.normal_form)
    assert 3.5 <= rep.ratio <= 4.5
    assert rep.pre_residual < 1e-8
    assert rep.closed_form_residual < 1e-8
    assert rep.wiring_residual < 1e-8


def test_dexp_inverse_solves():
    Z0 = np.array([[0.0, 0.4], [0.0, 0.0]])
    Q = np.array([[0.1, -0.3], [0.7, -0.1]])
    Z1 = dexp_inverse(Z0, Q)
    assert np.allclose(Z1 + 0.5 * (Z0 @ Z1 + Z1 @ Z0) + Z0 @ Z1 @ Z0 / 6, Q)


def test_certificate_marginal_when_Z1_zero():
    cert = gap_certificate(ParabolicForm(1, 0.2), np.zeros((2, 2)), [1e-3, -1e-3])
    assert all(v.verdict == "marginal" and v.d == 0 for v in cert.verdicts)


def test_certificate_negative_a():
    # a < 0 and [B11^2] > 0 with [P]_21 = -[B11^2]: eps > 0 opens the gap
    P = np.array([[0.0, 0.0], [-0.5, 0.0]])
    cert = gap_certificate(ParabolicForm(1, -0.2), P, [1e-3, -1e-3])
    assert cert.verdicts[0].d < 0 and cert.verdicts[0].verdict == "hyperbolic"
    assert cert.verdicts[1].verdict != "hyperbolic"
    assert cert.hyperbolic_side == 1


def test_certificate_requires_nonzero_a():
    with pytest.raises(ValueError):
        gap_certificate(ParabolicForm(1, 0.0), np.eye(2), [1e-3])


def test_rational_edge_certificate_side():
    from fractions import Fraction
    from gaplab.spectrum import gap_labels, spectrum_rational
    spec = gap_labels(spectrum_rational(0.3, Fraction(3, 5)), check=False)
    g = spec.gaps[1]
    lo = rational_edge_certificate(0.3, Fraction(3, 5), g.lo, [1e-3, -1e-3])
    hi = rational_edge_certificate(0.3, Fraction(3, 5), g.hi, [1e-3, -1e-3])
    assert lo.orbit_residual < 1e-10 and hi.orbit_residual < 1e-10
    assert lo.certificate.hyperbolic_side == 1
    assert hi.certificate.hyperbolic_side == -1


# ----------------------------------------------------------------------------
# Wronskian

def test_wronskian_same_solution(gold30):
    f = solve_recursion((1.0, 0.3), 50, 0.4, 0.2, gold30)
    rep = wronskian(f, f, 0.4, 0.2, gold30)
    assert np.max(np.abs(rep.values)) == 0 and rep.dependent


def test_wronskian_constant(gold30):
    f = solve_recursion((1.0, 0.0), 60, 0.4, 0.2, gold30, theta=0.1)
    g = solve_recursion((0.0, 1.0), 60, 0.4, 0.2, gold30, theta=0.1)
    rep = wronskian(f, g, 0.4, 0.2, gold30, theta=0.1)
    assert rep.drift < 1e-10 and not rep.dependent


def test_wronskian_decaying_pair_dependent(gold30):
    pairs = dual_eigenpairs(0.05, gold30, 0.1, 60, resonance=False)
    p = pairs[60]
    u = p.coeffs
    rep = wronskian(u, 2 * u, p.lam, p.E, gold30, theta=p.theta, start=p.lo)
    assert rep.dependent


# ----------------------------------------------------------------------------
# pipeline

def test_pipeline_gap_edge(edge_run):
    r = edge_run
    assert r.case == "B"
    assert isinstance(r.normal_form, ParabolicForm) and abs(r.normal_form.a) > 1e-3
    assert r.rho_residual < 1e-4
    assert all(rec["ok"] is not False for rec in r.ledger)


def test_pipeline_mid_band(gold30):
    r = reduce_pipeline(0.05, gold30, 0.3, n_rho=20_000)
    assert r.case == "A"
    assert r.rho_residual <= 1e-4
    A = amo_matrix(0.05, r.E)
    C = conjugate_cocycle(r.B, A, gold30)
    x = np.linspace(0, r.B.period, 17)
    assert np.allclose(C(x).real, rot(r.normal_form), atol=1e-8)


def test_pipeline_degraded_window(gold30):
    with pytest.raises(PipelineError) as exc:
        reduce_pipeline(0.05, gold30, 0.3, M=8, n_rho=20_000)
    led = {rec["quantity"]: rec["value"] for rec in exc.value.ledger}
    # the truncation defect is what the rotation residual inherits
    assert led["duality defect sup|g|"] >= 0.1 * led["rotation residual"]
    assert exc.value.ledger[-1]["ok"] is False
