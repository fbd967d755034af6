import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from unidecay.applications import (BidomainProblem, RDProblem, bidomain_family, bidomain_operator,
                                   bidomain_symbol_constants, conductivity_tensors, delta0_rule,
                                   g_extrema, h_operator, modulation_residual, nagumo_problem,
                                   rd_delta0, rd_operator, uniform_wave_report)
from unidecay.errors import DConditionViolated, StabilityConditionFails


def test_laplacian_stencil_spectrum():
    n = 40
    y = np.linspace(-1, 1, n + 2)[1:-1]
    prob = RDProblem(D=[[1.0]], y=y, V=np.zeros(n))
    a = rd_operator(prob, 0.0).entries
    h = prob.h
    w = np.sort(np.linalg.eigvalsh(a))
    # Dirichlet second difference: -4/h^2 sin^2(j pi / (2(n+1)))
    exact = np.sort(-4 / h ** 2 * np.sin(np.arange(1, n + 1) * np.pi / (2 * (n + 1))) ** 2)
    assert np.allclose(w, exact, rtol=1e-10, atol=1e-10)
    assert w.max() < 0 and w.min() > -4 / h ** 2
    # xi^2 = 1 shifts by -1 exactly
    assert np.array_equal(rd_operator(prob, 1.0).entries, a - np.eye(n))


def test_rd_family_perturbation(rd_fam, rd_problem):
    n = rd_problem.n
    assert np.array_equal(rd_fam.E(0.0), np.zeros((n, n)))
    # k = 1: E(alpha) = -alpha D times the identity
    assert np.array_equal(rd_fam.E(0.7), -0.7 * 1.1 * np.eye(n))
    assert rd_fam.q1 == pytest.approx(rd_fam.metadata["delta0"] * 1.1)


def _front_alignment(vec, deriv):
    return 1 - abs(np.vdot(vec, deriv)) / (np.linalg.norm(vec) * np.linalg.norm(deriv))


def test_nagumo_translation_mode_converges():
    res = []
    for n in (128, 256):
        p = nagumo_problem(n=n, pin_zero_mode=False)
        w, v = sla.eig(rd_operator(p, 0.0).entries)
        j = int(np.argmin(np.abs(w)))
        kap = 1 / math.sqrt(2 * 1.1)
        e = np.exp(-kap * p.y)
        res.append((abs(w[j]), _front_alignment(v[:, j], kap * e / (1 + e) ** 2)))
    assert res[1][0] < res[0][0] < 1e-3
    assert res[1][1] < res[0][1] < 1e-5


def test_nagumo_pinned_has_exact_zero():
    p = nagumo_problem(n=128)
    w = np.linalg.eigvals(rd_operator(p, 0.0).entries)
    assert np.min(np.abs(w)) < 1e-10


def test_delta0_rule_examples():
    assert delta0_rule(0.5, 1.0, 2.0) == pytest.approx(0.495)
    assert delta0_rule(0.5, 1.0, 2.0) * 2.0 == pytest.approx(0.99)
    assert delta0_rule(0.0, 3.0, 1.7) == pytest.approx(0.99)
    with pytest.raises(DConditionViolated):
        delta0_rule(2.0, 1.0, 2.0)


def test_rd_delta0_isotropic_diffusion():
    rule = rd_delta0(nagumo_problem(n=32), M0=1.2)
    assert rule["rho"] == 0.0
    assert rule["q_slope"] == pytest.approx(0.99 * 1.1)
    with pytest.raises(DConditionViolated):
        rd_delta0(nagumo_problem(n=32, D=2.5), M0=1.2)


def test_symbol_constants_isotropic():
    c = bidomain_symbol_constants(0.0, 0.0, 0.7)
    assert (c["N0_sq"], c["eta0"], c["eta1"], c["beta0"], c["beta1"]) == (0.5, 0.5, 0.0, 0.0, 0.0)


def test_symbol_constants_division_oracle():
    # ((1.5 s^2 + 0.5)(0.5 s^2 + 1.5)) / (2 (s^2 + 1)) divided by hand:
    # numerator 0.75 s^4 + 2.5 s^2 + 0.75 = (s^2 + 1)(0.75 s^2 + 1.75) - 1
    c = bidomain_symbol_constants(0.5, 0.0, 0.0)
    assert c["N0_sq"] == pytest.approx(0.375, rel=1e-14)
    assert c["eta1"] == pytest.approx(0.0, abs=1e-14)
    assert c["eta0"] == pytest.approx(0.875, rel=1e-14)
    assert c["beta1"] == pytest.approx(0.0, abs=1e-14)
    assert c["beta0"] == pytest.approx(-0.5, rel=1e-14)


def _symbol(nu1, nu2, gamma, s):
    ai, ae = conductivity_tensors(nu1, nu2, gamma)
    qi = ai[0, 0] * s * s + (ai[0, 1] + ai[1, 0]) * s + ai[1, 1]
    qe = ae[0, 0] * s * s + (ae[0, 1] + ae[1, 0]) * s + ae[1, 1]
    return qi * qe / (qi + qe)


def test_symbol_decomposition_residual():
    nu1, nu2, gamma = 0.2, 0.1, math.pi / 6
    c = bidomain_symbol_constants(nu1, nu2, gamma)
    s = np.linspace(-100, 100, 20001)
    p = c["N0_sq"] * (s - c["eta1"]) ** 2 + c["eta0"]
    g = (c["beta1"] * s + c["beta0"]) / (s * s + 1)
    assert np.max(np.abs(_symbol(nu1, nu2, gamma, s) - p - g)) <= 1e-12 * np.max(p)
    # N0^2 is the s^2 asymptote, i.e. the symbol at (1, 0)
    ai, ae = conductivity_tensors(nu1, nu2, gamma)
    assert ai[0, 0] * ae[0, 0] / 2 == pytest.approx(c["N0_sq"], rel=1e-13)
    assert _symbol(nu1, nu2, gamma, 1e6) / 1e12 == pytest.approx(c["N0_sq"], rel=1e-5)


def test_g_extrema_examples():
    g = g_extrema(1.0, 0.0)
    assert g["sup"] == pytest.approx(0.5) and g["inf"] == pytest.approx(-0.5)
    assert g["g_bar"] == pytest.approx(0.0, abs=1e-15) and g["g_delta"] == pytest.approx(0.5)
    g = g_extrema(0.0, 1.0)
    assert (g["sup"], g["inf"], g["g_bar"], g["g_delta"]) == (1.0, 0.0, 0.5, 0.5)
    g = g_extrema(0.0, 0.0)
    assert (g["sup"], g["inf"], g["g_bar"], g["g_delta"]) == (0.0, 0.0, 0.0, 0.0)


def _plain_bidomain(n=64, **kw):
    prob = BidomainProblem(nu1=0.05, nu2=0.02, gamma=math.pi / 6, a=0.5, n=n, pin_zero_mode=False, **kw)
    return prob


def test_bidomain_operator_fourier_diagonal():
    # a = 1/2 gives c = 0; replace the profile by f' = -1
    prob = _plain_bidomain()
    assert prob.c == 0.0
    prob.V = -np.ones(prob.n)
    a = bidomain_operator(prob, 0.0).entries
    w = np.sort(np.linalg.eigvals(a).real)
    exact = np.sort(-prob.const["N0_sq"] * prob.k ** 2 - 1)
    assert np.allclose(w, exact, rtol=1e-10, atol=1e-10)


def test_bidomain_translation_mode(bd_problem):
    prob = BidomainProblem(nu1=bd_problem.nu1, nu2=bd_problem.nu2, gamma=bd_problem.gamma,
                           a=bd_problem.a, n=bd_problem.n, pin_zero_mode=False)
    w, v = sla.eig(bidomain_operator(prob, 0.0).entries)
    j = int(np.argmin(np.abs(w)))
    e = np.exp(prob.kappa_front * prob.y)
    assert abs(w[j]) < 1e-8
    assert _front_alignment(v[:, j], -prob.kappa_front * e / (1 + e) ** 2) < 1e-8


def test_isotropic_h_is_scalar_shift():
    prob = BidomainProblem(nu1=0.0, nu2=0.0, gamma=0.0, a=0.5, n=32, pin_zero_mode=False)
    for xi in (0.3, -1.2):
        assert np.allclose(h_operator(prob, xi), -0.5 * xi ** 2 * np.eye(prob.n), atol=1e-14)
    assert np.array_equal(h_operator(prob, 0.0), np.zeros((32, 32)))


def test_stability_condition_plug_in(bd_problem):
    prob = BidomainProblem(nu1=bd_problem.nu1, nu2=bd_problem.nu2, gamma=bd_problem.gamma,
                           a=bd_problem.a, n=bd_problem.n)
    prob.const = dict(prob.const, eta0=2.0)
    prob.gx = dict(prob.gx, g_delta=0.5, g_bar=0.0)
    fam = bidomain_family(prob, "+", M_b=1.5, nu=0.1)
    assert fam.q1 == pytest.approx(1.25)
    assert np.array_equal(fam.E(0.0), np.zeros((prob.n, prob.n)))
    prob.const = dict(prob.const, eta0=0.5)
    with pytest.raises(StabilityConditionFails):
        bidomain_family(prob, "+", M_b=1.5, nu=0.1)


def test_modulation_identity_aligned(bd_problem):
    for m in (1, 2, -3):
        assert modulation_residual(bd_problem, bd_problem.aligned_xi(m)) <= 1e-8
    # off the aligned grid the rounded window no longer matches the exact modulation
    assert modulation_residual(bd_problem, 0.5 * bd_problem.aligned_xi(1)) > 1e-6


def test_uniform_wave_report_rd(rd_problem, rd_envelope):
    rep = uniform_wave_report(lambda xi: rd_operator(rd_problem, xi * xi), rd_envelope,
                              [0.0, 0.1, 0.5, 2.0], [0.0, 0.5, 5.0, 50.0])
    assert rep.summary["passed"]
    assert math.log(rep.summary["sup_measured"]) < rd_envelope.log_prefactor
    # the xi = 0 rows measure the base semigroup
    assert rep.rows[0, 2] == pytest.approx(1.0)


def test_uniform_wave_report_bidomain(bd_problem, bd_envelope):
    rep = uniform_wave_report(lambda xi: bidomain_operator(bd_problem, xi), bd_envelope,
                              [0.0, 0.05, 0.3], [0.0, 1.0, 20.0])
    assert rep.summary["passed"]


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.49, 0.49), st.floats(-0.49, 0.49), st.floats(-math.pi, math.pi))
def test_tensor_sum_and_decomposition(nu1, nu2, gamma):
    ai, ae = conductivity_tensors(nu1, nu2, gamma)
    assert np.array_equal(ai + ae, 2 * np.eye(2))
    c = bidomain_symbol_constants(nu1, nu2, gamma)
    s = np.linspace(-50, 50, 501)
    p = c["N0_sq"] * (s - c["eta1"]) ** 2 + c["eta0"]
    g = (c["beta1"] * s + c["beta0"]) / (s * s + 1)
    assert np.max(np.abs(_symbol(nu1, nu2, gamma, s) - p - g)) <= 1e-10 * max(1.0, np.max(p))
    # harmonic-mean bounds: Q lies between min(Qi, Qe)/2 and min(Qi, Qe)
    qi = ai[0, 0] * s * s + 2 * ai[0, 1] * s + ai[1, 1]
    qe = ae[0, 0] * s * s + 2 * ae[0, 1] * s + ae[1, 1]
    q = _symbol(nu1, nu2, gamma, s)
    mn = np.minimum(qi, qe)
    assert np.all(q >= mn / 2 - 1e-12) and np.all(q <= mn + 1e-12)
