import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from rcpanel import limit_laws as ll
from rcpanel.errors import (BetaOutOfRange, NonIntegrable, UnsupportedBeta,
                            UnsupportedRegime)
from rcpanel.panel_model import BetaSquared, Degenerate, sample_coefficients

from helpers import log_chf_plus, log_chf_star, sigma0_quad

# mpmath oracles (25 digits), frozen
SIGMA_INF2_125 = 8.763364804397916
C_PLUS_15_B2 = 6.266570686577501  # c+ at beta = 1.5, psi1 = psi(1) of BetaSquared(2, 1.5)
K_BAR_05 = 2.060897024589991
SIGMA_BAR2_B2_25 = 41.61670178918302  # E (1-a)^-2, a^2 ~ Beta(2, 2.5)
SIGMA_STAR_T2 = {0: 6.222222222222222, 1: 6.381608384277067, 2: 6.222222222222222,
                 4: 5.674523007856340, 8: 4.718742980176076}


# --- independent quadrature oracles ---------------------------------------

def _sigma_inf2_quad(beta, psi1=1.0):
    """psi^2 int int E z^2(1; x1, x2) (x1 x2)^{beta-1} dx via x1 = s v, x2 = s (1 - v)."""
    def F(s):  # int int_{[0,1]^2} exp(-s |u - v|)
        return 2 * (s - 1 + math.exp(-s)) / (s * s) if s > 1e-4 else 1 - s / 3 + s * s / 12
    radial = integrate.quad(lambda s: s ** (2 * beta - 3) * F(s) / 4, 0, 1, limit=200)[0]
    radial += integrate.quad(lambda s: s ** (2 * beta - 3) * F(s) / 4, 1, np.inf, limit=200)[0]
    return psi1**2 * special.beta(beta - 1, beta - 1) * radial


def _abs_moment_quad(p):
    return 2 * integrate.quad(lambda z: z**p * math.exp(-z * z / 2) / math.sqrt(2 * math.pi),
                              0, np.inf)[0]


def _k_inf_quad(beta):
    """2 E int_0^inf z^{beta-1} (1 - exp(-Z^2/(8z))) dz by nested adaptive quadrature."""
    def inner(x):
        c = x * x / 8
        g = lambda z: z ** (beta - 1) * -math.expm1(-c / z)  # noqa: E731
        return (integrate.quad(g, 0, c, limit=200)[0]
                + integrate.quad(g, c, np.inf, limit=200)[0])
    phi = lambda x: 2 * math.exp(-x * x / 2) / math.sqrt(2 * math.pi)  # noqa: E731
    return 2 * sum(integrate.quad(lambda x: inner(x) * phi(x), a, b, epsrel=1e-9, limit=200)[0]
                   for a, b in ((0, 1), (1, 12)))


# --- constants -------------------------------------------------------------

def test_sigma_inf2():
    assert ll.const_sigma_inf2(1.25, 1) == pytest.approx(SIGMA_INF2_125, rel=1e-13)
    assert ll.const_sigma_inf2(1.25, 1) == pytest.approx(_sigma_inf2_quad(1.25), rel=1e-3)
    assert ll.const_sigma_inf2(1.3, 2) == pytest.approx(4 * ll.const_sigma_inf2(1.3, 1), rel=1e-14)
    with pytest.raises(BetaOutOfRange):
        ll.const_sigma_inf2(1.5)


def test_sigma_inf2_pole():
    # simple pole at 3/2 with residue pi/2 in the variable 3 - 2 beta
    b = 1.4999
    assert ll.const_sigma_inf2(b) * (3 - 2 * b) == pytest.approx(math.pi / 2, rel=1e-3)
    assert ll.const_sigma_inf2(b) > 1e3


@pytest.mark.parametrize("beta", [1.05, 1.15, 1.25, 1.35, 1.45])
def test_sigma_inf2_grid(beta):
    assert ll.const_sigma_inf2(beta) == pytest.approx(_sigma_inf2_quad(beta), rel=1e-3)


def test_c_inf():
    assert ll.const_c_inf(0.5, 1) == pytest.approx(1.0, rel=1e-14)
    assert ll.const_c_inf(0.7, 2) == pytest.approx(4 * ll.const_c_inf(0.7, 1), rel=1e-14)
    with pytest.raises(BetaOutOfRange):
        ll.const_c_inf(1.0)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("beta", [0.2, 0.4, 0.6, 0.8, 0.9])
def test_c_inf_k_inf_ratio(beta):
    k = _k_inf_quad(beta)
    assert ll.const_k_inf(beta) == pytest.approx(k, rel=1e-3)
    assert ll.const_c_inf(beta, 1.7) / (1.7**2 * k) == pytest.approx(beta, rel=1e-3)


@pytest.mark.parametrize("beta", [0.3, 0.6, 0.75, 1.2, 1.4])
def test_sigma0_double_integral(beta):
    assert ll.const_sigma0(beta) == pytest.approx(sigma0_quad(beta), rel=1e-4)


def test_sigma0_scaling():
    assert ll.const_sigma0(0.75, 2) == pytest.approx(4 * ll.const_sigma0(0.75, 1), rel=1e-14)
    expected = 2**-0.5 * math.gamma(0.5) * special.beta(0.25, 0.25) / 1.5
    assert ll.const_sigma0(0.75) == pytest.approx(expected, rel=1e-14)


def test_c_plus_values():
    psi = BetaSquared(2, 1.5).psi1
    assert ll.const_c_plus(1.5, psi) == pytest.approx(C_PLUS_15_B2, rel=1e-13)
    assert ll.const_c_plus(0.5, 1) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    assert ll.const_c_star(1.5, 1) / ll.const_c_plus(1.5, 1) == pytest.approx(
        _abs_moment_quad(3.0), rel=1e-10)
    assert ll.const_c_star(1.5, 1) / ll.const_c_plus(1.5, 1) == pytest.approx(1.5957691, rel=1e-7)
    assert ll.const_c_plus(1.3, 2) == pytest.approx(2 * ll.const_c_plus(1.3, 1), rel=1e-14)
    for b in (0.0, 1.0, 2.0):
        with pytest.raises(BetaOutOfRange):
            ll.const_c_plus(b)


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.8, 1.3, 1.5, 1.8])
def test_c_plus_chf_integral(beta):
    c = ll.const_c_plus(beta)
    lc = log_chf_plus(beta)
    assert -lc.real == pytest.approx(c, rel=1e-4)
    assert lc.imag == pytest.approx(c * math.tan(math.pi * beta / 2), rel=1e-4)
    assert c > 0
    assert ll.const_c_star(beta) == pytest.approx(c * _abs_moment_quad(2 * beta), rel=1e-4)
    assert -log_chf_star(beta).real == pytest.approx(ll.const_c_star(beta), rel=1e-4)


def test_mean_constants():
    m = ll.const_mean_limits(1.5, psi1=1.0)
    assert m.sigma_bar2_beta == pytest.approx(2 * math.sqrt(math.pi) / 1.5, rel=1e-14)
    assert m.K_bar is None
    assert ll.const_mean_limits(0.5, psi1=1.0).k_bar == pytest.approx(K_BAR_05, rel=1e-14)
    law = BetaSquared(2, 2.5)
    assert ll.const_mean_limits(2.5, law).sigma_bar2 == pytest.approx(SIGMA_BAR2_B2_25, rel=1e-8)
    assert ll.const_mean_limits(3.0, Degenerate(0.5)).sigma_bar2 == pytest.approx(4.0)


@pytest.mark.xfail(strict=False, reason="infinite-variance MC average; see decisions ledger")
def test_mean_constant_mc():
    a = sample_coefficients(BetaSquared(2, 2.5), 10**6, seed=1)
    assert np.mean((1 - a) ** -2.0) == pytest.approx(SIGMA_BAR2_B2_25, rel=0.01)


def test_sigma2_cross():
    assert ll.const_sigma2_cross(Degenerate(0.0)) == 1.0
    assert ll.const_sigma2_cross(Degenerate(0.5)) == pytest.approx(2.96296296, rel=1e-8)
    with pytest.raises(NonIntegrable):
        ll.const_sigma2_cross(BetaSquared(2, 1.4))


def test_sigma2_cross_beta_squared_mc():
    law = BetaSquared(2, 2.5)
    target = ll.const_sigma2_cross(law)
    a = sample_coefficients(law, 2 * 10**6, seed=2)
    A = np.array([ll.conditional_longrun_var(x, y) for x, y in zip(a[:2000:2], a[1:2000:2])])
    assert np.all(A > 0)
    w1, w2 = 1 - a[::2] ** 2, 1 - a[1::2] ** 2
    vals = (1 + a[::2] * a[1::2]) / (w1 * w2 * (0.5 * (w1 + w2) + 0.5 * (a[::2] - a[1::2]) ** 2))
    assert np.mean(vals) == pytest.approx(target, rel=0.05)


def test_sigma_star_t2():
    law = BetaSquared(2, 2.5)
    for t, v in SIGMA_STAR_T2.items():
        assert ll.const_sigma_star_t2(law, t) == pytest.approx(v, rel=1e-7)
    assert ll.const_sigma_star_t2(Degenerate(0.4), 3) == 0.0
    with pytest.raises(NonIntegrable):
        ll.const_sigma_star_t2(BetaSquared(2, 1.9))


def test_conditional_longrun_var():
    assert ll.conditional_longrun_var(0.0, 0.0, same_row=True) == pytest.approx(2.0)
    assert ll.conditional_longrun_var(0.0, 0.0) == 1.0
    assert ll.conditional_longrun_var(0.5, 0.5) == pytest.approx(1.25 / 0.75**3, rel=1e-14)
    assert ll.A_tt(0.5, 1, 0.0) == pytest.approx(4.592592592592593, rel=1e-14)
    assert ll.A_tt(0.0, 0, -2.0) == pytest.approx(0.0, abs=1e-15)  # Rademacher squares are constant


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 0.999), st.floats(0, 0.999), st.integers(1, 3000))
def test_longrun_var_bound(a1, a2, n):
    k = np.arange(-(n - 1), n)
    exact = np.sum((n - np.abs(k)) * (a1 * a2) ** np.abs(k)) / ((1 - a1 * a1) * (1 - a2 * a2))
    assert exact <= ll.longrun_var_bound(a1, a2, n) * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 0.99), st.floats(0, 0.99))
def test_longrun_var_is_limit(a1, a2):
    n = 20000
    k = np.arange(-(n - 1), n)
    exact = np.sum((n - np.abs(k)) * (a1 * a2) ** np.abs(k)) / ((1 - a1 * a1) * (1 - a2 * a2))
    assert exact / n == pytest.approx(ll.conditional_longrun_var(a1, a2), rel=2e-2)


# --- classifier ------------------------------------------------------------

def test_classify_examples():
    c = ll.classify("CrossCov", 1.25, ll.GrowthRule(3), psi1=1.0)
    assert (c.case_id, c.p_N, c.p_n) == ("C3.5-i", 0.5, 0.25)
    assert c.limit.kind == "Gaussian" and c.limit.variance == pytest.approx(SIGMA_INF2_125)
    c = ll.classify("CrossCov", 1.25, ll.GrowthRule(2), psi1=1.0)
    assert c.case_id == "C3.5-iv"
    assert (c.p_N, c.p_n) == pytest.approx((1 - 3 / 5, 0.5))
    assert c.limit.alpha == pytest.approx(5 / 3)
    assert c.limit.c == pytest.approx(ll.const_sigma0(1.25) / 2 ** (2.5 / 3))
    c = ll.classify("TemporalCov", 1.5, ll.GrowthRule(1.2), psi1=2.0)
    assert c.case_id == "T4.1-ii" and c.limit.kind == "AsymmetricStable"
    assert c.limit.c == pytest.approx(ll.const_c_plus(1.5, 2.0))
    assert c.p_N == pytest.approx(1 / 3)
    assert c.centering == ll.Centering.TRUE_GAMMA_IF_BETA_GT1
    c = ll.classify("Mean", 2.5, ll.GrowthRule(0.7), mixing=BetaSquared(2, 2.5))
    assert (c.case_id, c.p_N, c.p_n) == ("P3.4-iv", 0.5, 0.5)
    assert c.limit.variance == pytest.approx(SIGMA_BAR2_B2_25, rel=1e-8)


def test_classify_intermediate_and_mean_boundary():
    c = ll.classify("CrossCov", 1.25, ll.GrowthRule(2.5, 2.0), psi1=1.0)
    assert c.case_id == "T3.1-iii" and c.limit.lam_inf == pytest.approx(2 ** (1 / 2.5))
    c = ll.classify("Mean", 1.5, ll.GrowthRule(1.5))
    assert c.case_id == "P3.4-int" and c.limit.kind == "IntermediatePoisson"


def test_classify_log_factor():
    c = ll.classify("CrossCov", 0.8, ll.GrowthRule(2.0), psi1=1.0)
    assert c.case_id == "C3.5-ii" and c.log_factor
    N, n = 10**6, 100
    lam = N ** (1 / 1.6) / n
    assert c.scale(N, n) == pytest.approx(N ** (1 - 1 / 1.6) / math.log(lam) ** (1 / 1.6))


def test_classify_errors():
    for b in (1.0, 2.0):
        with pytest.raises(UnsupportedBeta):
            ll.classify("TemporalCov", b, ll.GrowthRule(1))
    for b in (0.5, 0.75, 1.5):
        with pytest.raises(UnsupportedBeta):
            ll.classify("CrossCov", b, ll.GrowthRule(1))
    with pytest.raises(UnsupportedRegime):
        ll.classify("CrossCov", 0.6, ll.GrowthRule(0.6))
    with pytest.raises(UnsupportedRegime):
        ll.classify("CrossCov", 0.6, ll.GrowthRule(1.2 / 1.4))


CROSS_BOUNDS = lambda b: [2 * b, b, 2 * b / (4 * b - 1) if b > 0.25 else -1, 2 * b / (5 - 4 * b)]  # noqa: E731
EXCLUDED = {"CrossCov": (0.5, 0.75, 1.0, 1.5, 2.0), "TemporalCov": (1.0, 2.0), "Mean": (1.0, 2.0)}


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(list(EXCLUDED)), st.floats(0.05, 3.5), st.floats(0.05, 8.0),
       st.floats(0.999, 1.001))
def test_classify_total_and_locally_constant(stat, beta, rho, jiggle):
    assume(all(abs(beta - v) > 1e-6 for v in EXCLUDED[stat]))
    bounds = CROSS_BOUNDS(beta) if stat == "CrossCov" else [beta]
    assume(all(abs(rho - b) > 2e-3 * max(b, 1) for b in bounds))
    c1 = ll.classify(stat, beta, ll.GrowthRule(rho), psi1=1.3)
    c2 = ll.classify(stat, beta, ll.GrowthRule(rho * jiggle), psi1=1.3)
    assert c1.case_id == c2.case_id
    assert math.isfinite(c1.p_N) and math.isfinite(c1.p_n)
    lim = c1.limit
    if lim.kind in ("SymmetricStable", "AsymmetricStable", "NegSquaredSymmetricStable"):
        assert 0 < lim.alpha <= 2
        if lim.c is not None:
            assert lim.c > 0
