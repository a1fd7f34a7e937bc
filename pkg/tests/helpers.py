"""Shared test helpers and independent quadrature oracles."""

import math

import numpy as np
from scipy import integrate

# filled by the acceptance tests, printed by the terminal summary hook
ACCEPTANCE: dict = {}


def mc_ok(estimate, target, se, k=3.0):
    """``|estimate - target| <= k se``."""
    return abs(estimate - target) <= k * se


def sigma0_quad(beta, psi1=1.0):
    """``psi^2 2^{-2 beta/3} int int (1 - exp(-1/(x1 x2 (x1 + x2)))) (x1 x2)^{beta-1} dx`` in log coordinates."""
    def f(v, u):
        s = u + v
        return -math.expm1(-math.exp(-s) / (math.exp(u) + math.exp(v))) * math.exp(beta * s)
    val = integrate.dblquad(f, -150, 150, -150, 150, epsabs=0, epsrel=1e-9)[0]
    return psi1**2 * 2 ** (-2 * beta / 3) * val


def log_chf_plus(beta, psi1=1.0, theta=1.0):
    """psi int_0^inf (e^{i theta/(2x)} - 1 - i theta/(2x) 1{beta>1}) x^{beta-1} dx, via y = 1/(2x)."""
    comp = beta > 1
    w = lambda y: y ** (-1 - beta)  # noqa: E731
    re = integrate.quad(lambda y: (math.cos(theta * y) - 1) * w(y), 0, 1, limit=200)[0]
    re += integrate.quad(w, 1, np.inf, weight="cos", wvar=theta, limit=200)[0]
    re -= integrate.quad(w, 1, np.inf)[0]
    im = integrate.quad(lambda y: (math.sin(theta * y) - (theta * y if comp else 0)) * w(y),
                        0, 1, limit=200)[0]
    im += integrate.quad(w, 1, np.inf, weight="sin", wvar=theta, limit=200)[0]
    if comp:
        im -= theta * integrate.quad(lambda y: y ** -beta, 1, np.inf)[0]
    return psi1 * 2.0**-beta * complex(re, im)


_BINOM = (1, 1 / 2, 3 / 8, 5 / 16, 35 / 128, 63 / 256, 231 / 1024)


def _star_kernel(y, p):
    """``((1 - 2 i y)^{-1/2} - sum_{k<p} c_k (2 i y)^k) / y^p``, by series for small ``y``."""
    if y < 1e-3:
        return sum(c * (2j) ** k * y ** (k - p) for k, c in enumerate(_BINOM) if k >= p)
    head = sum(c * (2j * y) ** k for k, c in enumerate(_BINOM[:p]))
    return ((1 - 2j * y) ** -0.5 - head) / y**p


def log_chf_star(beta, psi1=1.0):
    """psi E int_0^inf (e^{i Z^2/(2x)} - 1 - i Z^2/(2x) 1{beta>1}) x^{beta-1} dx at theta = 1.

    The Gaussian expectation is taken in closed form, leaving one quadrature
    in ``y = 1/(2x)``; the power ``y^{-1-beta}`` is carried by an algebraic weight.
    """
    comp = beta > 1
    p = 2 if comp else 1  # kernel vanishes like y^p at 0
    out = 0j
    for part in (np.real, np.imag):
        g = lambda y: float(part(_star_kernel(y, p)))  # noqa: E731
        out += (1j if part is np.imag else 1) * integrate.quad(
            g, 0, 1, weight="alg", wvar=(p - 1 - beta, 0), limit=200)[0]
        out += (1j if part is np.imag else 1) * integrate.quad(
            lambda y: float(part((1 - 2j * y) ** -0.5)) * y ** (-1 - beta), 1, np.inf,
            limit=400)[0]
    out -= 1 / beta
    if comp:
        out -= 1j / (beta - 1)
    return psi1 * 2.0**-beta * out
