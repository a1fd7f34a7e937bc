"""Intermediate Poisson processes and their moment oracles.

The cross-sectional process is a Poisson integral of

    z(tau; x1, x2) = int_0^tau Y1(u; x1) Y2(u; x2) du

against the intensity ``psi1^2 (x1 x2)^{beta-1} dx1 dx2`` on ``[delta, x_max]^2``,
where ``Y1`` and ``Y2`` are independent stationary O-U processes with rates
``x1`` and ``x2``.  Given the Poisson points, each ``z`` has conditional mean
zero (the two Brownian motions are independent), so compensated and
uncompensated truncated integrals coincide in law and no compensator is added.

The iso-sectional process integrates ``z*(tau; x) = int_0^tau Y(u; x)^2 du``
against ``psi1 x^{beta-1} dx``.  For ``1 < beta < 2`` the compensator
``psi1 tau/2 int x^{beta-2} dx`` is subtracted (``E z* = tau/(2x)``).

Simulation is hybrid.  Points whose individual contribution can be large are
simulated exactly on an O-U grid:

* cross: ``L_R = {x1 x2 (x1 + x2) <= R}``; outside it ``E z^2 < tau/(2R)``;
* iso: ``x <= K``.

``R`` and ``K`` are tuned so the expected number of exact points matches a
target.  The remaining points are many and individually small; their sum is
replaced by a Gaussian vector with the exact mean and covariance, obtained by
quadrature of the closed-form moments below.

Without an explicit truncation and for ``1 < beta < 3/2`` the cross process
is not truncated at all: the Gaussian covariance is the closed-form
covariance of ``Z_beta`` minus the ``L_R`` part, so every point outside the
simulated set (including the ``L_R`` strip below ``UNTRUNCATED_DELTA``, whose
expected count is negligible) is represented with its exact second moments.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from . import _backend, _parallel, _rng
from .errors import (
    BetaOutOfRange,
    InvalidParameter,
    TauBeyondHorizon,
    TruncationInvalid,
    UnsupportedBeta,
)
from .limit_laws import const_sigma_inf2

__all__ = [
    "OUGrid",
    "PoissonTruncation",
    "ZPath",
    "ou_path",
    "z_cross",
    "z_iso",
    "G_overlap",
    "ez2_cross",
    "cov_z_cross",
    "mean_z_iso",
    "var_z_iso",
    "cov_Z_cross",
    "var_Z_iso_gaussian_part",
    "exact_region_count_cross",
    "truncated_var_Z_cross",
    "omitted_fraction_cross",
    "miss_probability_iso",
    "discretization_change_cross",
    "simulate_Z_cross",
    "simulate_Z_iso",
]

DEFAULT_DELTA = 1e-9
DEFAULT_X_MAX = 1e5
DEFAULT_H = 1.0 / 256
DEFAULT_EXACT_CROSS = 400.0
DEFAULT_EXACT_ISO = 32.0
UNTRUNCATED_DELTA = 1e-12
_TAG_CROSS = 0xC5
_TAG_ISO = 0x15


@dataclass(frozen=True)
class OUGrid:
    """Equispaced grid on ``[0, n_steps h]`` with ``n_steps = ceil(T/h)``."""

    h: float = DEFAULT_H
    horizon: float = 1.0

    def __post_init__(self):
        if not self.h > 0 or not self.horizon >= self.h:
            raise InvalidParameter("grid needs h > 0 and horizon >= h")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.horizon / self.h - 1e-9))

    @property
    def n_points(self) -> int:
        return self.n_steps + 1

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(self.n_points)

    def locate(self, tau: float) -> tuple[int, float]:
        """Grid index ``k`` and fraction ``f`` with ``tau = (k + f) h``."""
        if tau < 0:
            raise InvalidParameter("tau must be nonnegative")
        pos = tau / self.h
        k = int(math.floor(pos + 1e-9))
        f = max(pos - k, 0.0)
        if k > self.n_steps or (k == self.n_steps and f > 1e-9):
            raise TauBeyondHorizon(f"tau={tau} exceeds the grid horizon")
        if f < 1e-9:
            f = 0.0
        return k, f


@dataclass(frozen=True)
class PoissonTruncation:
    delta: float = DEFAULT_DELTA
    x_max: float = DEFAULT_X_MAX
    expected_count: float = math.nan

    def __post_init__(self):
        if not (0.0 < self.delta < self.x_max) or not math.isfinite(self.x_max):
            raise TruncationInvalid("need 0 < delta < x_max < inf")

    def with_count(self, count: float) -> "PoissonTruncation":
        return PoissonTruncation(self.delta, self.x_max, float(count))


@dataclass(frozen=True)
class ZPath:
    """Sampled values ``values[r, j]`` of replication ``r`` at ``taus[j]``."""

    taus: tuple
    values: np.ndarray
    kind: str
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.taus):
            raise InvalidParameter("values must have one column per tau")

    @property
    def reps(self) -> int:
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# Paths and functionals


def ou_path(x: float, grid: OUGrid, rng=None, size: int | None = None) -> np.ndarray:
    """Exact discretization of a stationary O-U path with rate ``x``.

    Returns ``grid.n_points`` values, or ``(size, n_points)`` when ``size`` is set.
    """
    if not x > 0:
        raise InvalidParameter("x must be positive")
    g = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    shape = () if size is None else (size,)
    phi = math.exp(-x * grid.h)
    sd = math.sqrt(-math.expm1(-2 * x * grid.h) / (2 * x))
    noise = g.standard_normal(shape + (grid.n_points,))
    out = np.empty_like(noise)
    out[..., 0] = noise[..., 0] / math.sqrt(2 * x)
    for k in range(1, grid.n_points):
        out[..., k] = phi * out[..., k - 1] + sd * noise[..., k]
    return out


def _trapezoid_to(f: np.ndarray, tau: float, grid: OUGrid):
    k, frac = grid.locate(tau)
    h = grid.h
    cum = np.concatenate([np.zeros(f.shape[:-1] + (1,)),
                          np.cumsum(0.5 * h * (f[..., 1:] + f[..., :-1]), axis=-1)], axis=-1)
    val = cum[..., k]
    if frac > 0:
        val = val + frac * (cum[..., k + 1] - cum[..., k])
    return val


def z_cross(tau: float, path1: np.ndarray, path2: np.ndarray, grid: OUGrid):
    """Trapezoid approximation of ``int_0^tau Y1 Y2 du``."""
    return _trapezoid_to(np.asarray(path1) * np.asarray(path2), tau, grid)


def z_iso(tau: float, path: np.ndarray, grid: OUGrid):
    """Trapezoid approximation of ``int_0^tau Y^2 du``."""
    p = np.asarray(path)
    return _trapezoid_to(p * p, tau, grid)


# ---------------------------------------------------------------------------
# Closed-form moments


def _F(tau, s):
    """``int_0^tau int_0^tau exp(-s |u - v|) du dv`` (broadcasts over ``s``)."""
    s = np.asarray(s, dtype=float)
    if tau <= 0:
        out = np.zeros(s.shape)
        return out if out.ndim else 0.0
    y = s * tau
    with np.errstate(divide="ignore", invalid="ignore"):
        big = 2.0 * (np.expm1(-y) + y) / (s * s)
    small = tau * tau * (1 - y / 3 + y * y / 12 - y**3 / 60)
    out = np.where(y < 1e-3, small, big)
    return out if out.ndim else float(out)


def G_overlap(tau_a: float, tau_b: float, s):
    """``int_0^tau_a int_0^tau_b exp(-s |u - v|) du dv``."""
    return 0.5 * (_F(tau_a, s) + _F(tau_b, s) - _F(abs(tau_b - tau_a), s))


def ez2_cross(tau: float, x1: float, x2: float) -> float:
    """``E z(tau; x1, x2)^2``."""
    return _F(tau, x1 + x2) / (4 * x1 * x2)


def cov_z_cross(tau_a: float, tau_b: float, x1: float, x2: float) -> float:
    return G_overlap(tau_a, tau_b, x1 + x2) / (4 * x1 * x2)


def mean_z_iso(tau: float, x: float) -> float:
    return tau / (2 * x)


def var_z_iso(tau: float, x: float) -> float:
    """``var z*(tau; x) = (2 x tau - 1 + exp(-2 x tau)) / (4 x^4)``."""
    return _F(tau, 2 * x) / (2 * x * x)


def cov_Z_cross(tau1: float, tau2: float, beta: float, psi1: float = 1.0) -> float:
    """``(sigma_inf^2 / 2)(tau1^{2H} + tau2^{2H} - |tau2 - tau1|^{2H})`` with ``H = 2 - beta``."""
    if tau1 < 0 or tau2 < 0:
        raise InvalidParameter("taus must be nonnegative")
    s2 = const_sigma_inf2(beta, psi1)
    e = 2 * (2 - beta)
    return 0.5 * s2 * (tau1**e + tau2**e - abs(tau2 - tau1) ** e)


# ---------------------------------------------------------------------------
# Cross case: exact region L_R and the Gaussian complement


def _u_edge(x1: float, R: float) -> float:
    """Largest ``x2`` with ``x1 x2 (x1 + x2) <= R``."""
    return 0.5 * (-x1 + math.sqrt(x1 * x1 + 4 * R / x1))


def _x1_limit(R: float, trunc: PoissonTruncation) -> float:
    return min((R / 2) ** (1 / 3), trunc.x_max)


def _ordered_marginal(x1, beta, R, trunc):
    """``int_{x1}^{min(u(x1), x_max)} x2^{beta-1} dx2 * x1^{beta-1}``."""
    top = min(_u_edge(x1, R), trunc.x_max)
    if top <= x1:
        return 0.0
    return x1 ** (beta - 1) * (top**beta - x1**beta) / beta


def exact_region_count_cross(beta: float, psi1: float, R: float,
                             trunc: PoissonTruncation) -> float:
    """Expected number of Poisson points in ``L_R`` within the truncation box."""
    lo, hi = math.log(trunc.delta), math.log(_x1_limit(R, trunc))
    if hi <= lo:
        return 0.0
    val, _ = integrate.quad(lambda u: _ordered_marginal(math.exp(u), beta, R, trunc) * math.exp(u),
                            lo, hi, limit=200, epsrel=1e-10)
    return 2.0 * psi1 * psi1 * val


def _solve_R(beta, psi1, trunc, target):
    def f(lr):
        return math.log(exact_region_count_cross(beta, psi1, math.exp(lr), trunc) + 1e-300) \
            - math.log(target)

    lo, hi = -10.0, 10.0
    while f(lo) > 0:
        lo -= 10
    while f(hi) < 0:
        hi += 10
        if hi > 200:
            return math.exp(hi)
    return math.exp(optimize.brentq(f, lo, hi, xtol=1e-10))


_GL_T, _GL_W = np.polynomial.legendre.leggauss(16)
_PANEL = 0.5  # panel width in log coordinates


def _gl_nodes(lo, hi):
    n = max(1, int(math.ceil((hi - lo) / _PANEL)))
    edges = np.linspace(lo, hi, n + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_T[None, :]).ravel()
    weights = (half[:, None] * _GL_W[None, :]).ravel()
    return nodes, weights


def _ordered_integral(f, beta, lo, hi, top=None):
    """``2 int int_{x1 <= x2} f(x1, x2) (x1 x2)^{beta-1} dx`` in log coordinates.

    ``x2`` runs up to ``top(x1)`` (vectorized, default ``hi``); ``f`` must be
    symmetric and vectorized.
    """
    l0, l1 = math.log(lo), math.log(hi)
    u1, w1 = _gl_nodes(l0, l1)
    if top is None:
        ut = np.full(u1.shape, l1)
    else:
        ut = np.log(np.minimum(top(np.exp(u1)), hi))
    span = np.maximum(ut - u1, 0.0)
    n_inner = max(1, int(math.ceil((l1 - l0) / _PANEL)))
    t, wt = _gl_nodes_scaled(n_inner)
    u2 = u1[:, None] + span[:, None] * t[None, :]
    x1 = np.exp(u1)[:, None]
    x2 = np.exp(u2)
    vals = f(x1, x2) * (x1 * x2) ** beta
    return 2.0 * float(np.sum(w1 * span * (vals @ wt)))


def _gl_nodes_scaled(n_panels):
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return ((mid[:, None] + half[:, None] * _GL_T[None, :]).ravel(),
            (half[:, None] * _GL_W[None, :]).ravel())


def _box_integral(f, beta, lo, hi):
    """``int int f(x1, x2) (x1 x2)^{beta-1} dx`` over ``[lo, hi]^2`` for symmetric ``f``."""
    return _ordered_integral(f, beta, lo, hi)


def _lr_integral(f, beta, R, trunc):
    """Same integral over ``L_R`` intersected with the truncation box."""
    x1max = _x1_limit(R, trunc)
    if x1max <= trunc.delta:
        return 0.0

    def top(x1):
        return np.maximum(0.5 * (-x1 + np.sqrt(x1 * x1 + 4 * R / x1)), x1)

    l0, l1 = math.log(trunc.delta), math.log(x1max)
    u1, w1 = _gl_nodes(l0, l1)
    x1v = np.exp(u1)
    ut = np.log(np.minimum(top(x1v), trunc.x_max))
    span = np.maximum(ut - u1, 0.0)
    n_inner = max(1, int(math.ceil((math.log(trunc.x_max) - l0) / _PANEL)))
    t, wt = _gl_nodes_scaled(n_inner)
    x2 = np.exp(u1[:, None] + span[:, None] * t[None, :])
    x1 = x1v[:, None]
    vals = f(x1, x2) * (x1 * x2) ** beta
    return 2.0 * float(np.sum(w1 * span * (vals @ wt)))


def truncated_var_Z_cross(tau: float, beta: float, psi1: float,
                          trunc: PoissonTruncation) -> float:
    """``var`` of the truncated integral over ``[delta, x_max]^2`` (continuous paths)."""
    g = lambda x1, x2: ez2_cross(tau, x1, x2)  # noqa: E731
    return psi1 * psi1 * _box_integral(g, beta, trunc.delta, trunc.x_max)


def omitted_fraction_cross(beta: float, psi1: float, trunc: PoissonTruncation,
                           tau: float = 1.0) -> float:
    """Share of ``var Z_beta(tau)`` lost to the truncation box (``1 < beta < 3/2``)."""
    full = cov_Z_cross(tau, tau, beta, psi1)
    return (full - truncated_var_Z_cross(tau, beta, psi1, trunc)) / full


@lru_cache(maxsize=32)
def _cross_complement_cov(taus: tuple, beta, psi1, R, delta, x_max, untruncated=False):
    trunc = PoissonTruncation(delta, x_max)
    m = len(taus)
    cov = np.zeros((m, m))
    for a in range(m):
        for b in range(a, m):
            ta, tb = taus[a], taus[b]
            if ta == 0 or tb == 0:
                continue
            g = lambda x1, x2: cov_z_cross(ta, tb, x1, x2)  # noqa: E731
            if untruncated:
                full = cov_Z_cross(ta, tb, beta, 1.0)
            else:
                full = _box_integral(g, beta, delta, x_max)
            inside = _lr_integral(g, beta, R, trunc)
            cov[a, b] = cov[b, a] = psi1 * psi1 * max(full - inside, 0.0)
    return cov


def _trapezoid_second_moment(s, hs, M):
    """Trapezoid double sum ``sum_ij w_i w_j exp(-s hs |i - j|)`` over ``M`` steps of ``hs``.

    Closed form ``hs^2 [2 ((M+1) q - A)/q^2 - (M+1) + (1 + rho^M)/2]`` with
    ``rho = exp(-eps)``, ``q = 1 - rho``, ``A = 1 - rho^{M+1}``; the bracket
    ``(M+1) q - A`` uses its power series when ``(M+1) eps < 1``.
    """
    s, hs, M = np.broadcast_arrays(np.asarray(s, float), np.asarray(hs, float),
                                   np.asarray(M, float))
    eps = s * hs
    n1 = M + 1.0
    q = -np.expm1(-eps)
    A = -np.expm1(-n1 * eps)
    direct = n1 * q - A
    series = np.zeros(eps.shape)
    term_e = np.ones(eps.shape)
    for k in range(1, 40):
        term_e = term_e * eps / k  # eps^k / k!
        if k >= 2:
            series += (-1) ** (k + 1) * term_e * (n1 - n1**k)
    bracket = np.where(n1 * eps < 1.0, series, direct)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 2.0 * bracket / (q * q) - n1 + 0.5 * (1.0 + np.exp(-M * eps))
    exact_small = M * M  # eps -> 0 limit
    return hs * hs * np.where(eps > 0, val, exact_small)


def _substeps(x, h):
    """Sub-steps per grid step so that the O-U step is at most ``1/(4x)``."""
    return np.maximum(1, np.ceil(4.0 * np.asarray(x) * h - 1e-12)).astype(np.int64)


def discretization_change_cross(beta: float, psi1: float, tau: float, h: float,
                                trunc: PoissonTruncation | None = None,
                                exact_count: float = DEFAULT_EXACT_CROSS) -> float:
    """Relative change of ``var Z_beta(tau)`` of the hybrid scheme when ``h`` is halved.

    Only the exact part depends on ``h``; its variance under trapezoid
    integration has a closed form per point, integrated here over ``L_R``.
    """
    trunc = trunc or PoissonTruncation()
    R = _solve_R(beta, psi1, trunc, exact_count)

    def disc(hh):
        def g(x1, x2):
            m = _substeps(np.maximum(x1, x2), hh)
            M = int(round(tau / hh)) * m
            return _trapezoid_second_moment(x1 + x2, hh / m, M) / (4 * x1 * x2)

        return psi1 * psi1 * _lr_integral(g, beta, R, trunc)

    total = truncated_var_Z_cross(tau, beta, psi1, trunc)
    return abs(disc(h) - disc(h / 2)) / total


# ---------------------------------------------------------------------------
# Simulation


def _check_taus(taus):
    t = tuple(float(v) for v in np.atleast_1d(taus))
    if not t or any(v < 0 for v in t) or any(b <= a for a, b in zip(t, t[1:])):
        raise InvalidParameter("taus must be nonnegative and increasing")
    return t


def _record_plan(taus, grid):
    locs = [grid.locate(t) for t in taus]
    idx = sorted({k for k, _ in locs} | {k + 1 for k, f in locs if f > 0})
    return locs, np.array(idx, dtype=np.int64)


def _interp_records(raw, locs, rec):
    pos = {int(k): i for i, k in enumerate(rec)}
    cols = []
    for k, f in locs:
        v = raw[:, pos[k]]
        if f > 0:
            v = v + f * (raw[:, pos[k + 1]] - v)
        cols.append(v)
    return np.stack(cols, axis=1)


def _run_exact(keys1, keys2, x1, x2, iso, grid, rec, threads):
    n = x1.shape[0]
    out = np.zeros((n, rec.shape[0]))
    if n == 0 or rec.shape[0] == 0:
        return out
    sub = _substeps(np.maximum(x1, x2), grid.h)
    kern = _backend.kernels()

    def work(lo, hi):
        kern.ou_integrals(keys1[lo:hi], keys2[lo:hi], x1[lo:hi], x2[lo:hi], int(iso), grid.h,
                          sub[lo:hi], rec, out[lo:hi])

    _parallel.run_ranges(work, n, threads, parts_per_thread=4)
    return out


def _inv_power(u, lo, hi, beta):
    """Inverse CDF of the density proportional to ``x^{beta-1}`` on ``[lo, hi]``."""
    return (lo**beta + u * (hi**beta - lo**beta)) ** (1.0 / beta)


class _OrderedSampler:
    """Samples ``x1`` from the ordered ``L_R`` marginal by a fine inverse-CDF table."""

    def __init__(self, beta, R, trunc):
        hi = _x1_limit(R, trunc)
        self.u = np.linspace(math.log(trunc.delta), math.log(hi), 20001)
        dens = np.array([_ordered_marginal(math.exp(v), beta, R, trunc) * math.exp(v)
                         for v in self.u])
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(self.u))])
        self.cdf = cdf / cdf[-1]
        self.beta, self.R, self.trunc = beta, R, trunc

    def draw(self, gen, k):
        x1 = np.exp(np.interp(gen.random(k), self.cdf, self.u))
        top = np.minimum(0.5 * (-x1 + np.sqrt(x1 * x1 + 4 * self.R / x1)), self.trunc.x_max)
        top = np.maximum(top, x1)
        x2 = _inv_power(gen.random(k), x1, top, self.beta)
        return x1, x2


def _draw_generators(seed, tag, reps):
    return [np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, tag, r]) for r in range(reps)]


def simulate_Z_cross(beta: float, psi1: float, taus, trunc: PoissonTruncation | None = None,
                     grid: OUGrid | None = None, seed: int = 0, reps: int = 1,
                     threads: int | None = 1,
                     exact_count: float = DEFAULT_EXACT_CROSS) -> ZPath:
    """Sample the cross-sectional intermediate process at ``taus``.

    Each replication draws a Poisson number of points in ``L_R``, simulates an
    independent O-U pair per point and adds an independent Gaussian vector for
    the points outside ``L_R``.
    """
    if not 0.0 < beta < 1.5:
        raise BetaOutOfRange("the cross intermediate process needs 0 < beta < 3/2")
    if beta == 1.0:
        raise UnsupportedBeta("beta = 1 is excluded")
    if not psi1 > 0 or reps < 1:
        raise InvalidParameter("need psi1 > 0 and reps >= 1")
    taus = _check_taus(taus)
    untruncated = trunc is None and 1.0 < beta < 1.5
    grid = grid or OUGrid(DEFAULT_H, max(max(taus), DEFAULT_H))
    if untruncated:
        R = _solve_R(beta, psi1, PoissonTruncation(UNTRUNCATED_DELTA, 1e300), exact_count)
        trunc = PoissonTruncation(UNTRUNCATED_DELTA,
                                  2 * _u_edge(UNTRUNCATED_DELTA, R)).with_count(math.inf)
    else:
        trunc = trunc or PoissonTruncation()
        R = _solve_R(beta, psi1, trunc, exact_count)
        trunc = trunc.with_count((psi1 * (trunc.x_max**beta - trunc.delta**beta) / beta) ** 2)
    mu = exact_region_count_cross(beta, psi1, R, trunc)
    locs, rec = _record_plan(taus, grid)
    sampler = _OrderedSampler(beta, R, trunc)
    cov = psi1 * psi1 * _cross_complement_cov(taus, beta, 1.0, R, trunc.delta, trunc.x_max,
                                              untruncated)
    chol = _psd_factor(cov)

    gens = _draw_generators(seed, _TAG_CROSS, reps)
    counts = np.array([g.poisson(mu) for g in gens])
    xs = [sampler.draw(g, int(k)) for g, k in zip(gens, counts)]
    gauss = np.stack([chol @ g.standard_normal(len(taus)) for g in gens])
    x1 = np.concatenate([a for a, _ in xs]) if reps else np.empty(0)
    x2 = np.concatenate([b for _, b in xs]) if reps else np.empty(0)
    base = _rng.derive_key(seed, _TAG_CROSS)
    rep_of = np.repeat(np.arange(reps, dtype=np.uint64), counts)
    pt = np.concatenate([np.arange(k, dtype=np.uint64) for k in counts])
    kp = _rng.child_v(_rng.child_v(np.uint64(base), rep_of), pt)
    raw = _run_exact(_rng.child_v(kp, np.uint64(0)), _rng.child_v(kp, np.uint64(1)),
                     x1, x2, False, grid, rec, threads)
    vals = _sum_by_rep(_interp_records(raw, locs, rec), counts, len(taus)) + gauss
    if taus[0] == 0.0:
        vals[:, 0] = 0.0
    config = {
        "beta": beta, "psi1": psi1, "seed": seed, "reps": reps,
        "truncation": asdict(trunc), "grid": {"h": grid.h, "horizon": grid.horizon},
        "exact_region_R": R, "exact_expected_count": mu,
        "gaussian_var_at_max_tau": float(cov[-1, -1]),
        "scheme": "untruncated" if untruncated else "box",
        "omitted_L2_fraction_tau1": (0.0 if untruncated else omitted_fraction_cross(beta, psi1, trunc)
                                     if 1.0 < beta < 1.5 else None),
    }
    return ZPath(taus, vals, "Cross", config)


def _psd_factor(cov):
    w, v = np.linalg.eigh(cov)
    return v * np.sqrt(np.clip(w, 0.0, None))


def _sum_by_rep(vals, counts, m):
    out = np.zeros((counts.shape[0], m))
    ends = np.cumsum(counts)
    starts = ends - counts
    for r, (a, b) in enumerate(zip(starts, ends)):
        if b > a:
            out[r] = np.sum(vals[a:b], axis=0)
    return out


def _iso_K(beta, psi1, trunc, target):
    return min((beta * target / psi1 + trunc.delta**beta) ** (1.0 / beta), trunc.x_max)


def var_Z_iso_gaussian_part(tau_a: float, tau_b: float, beta: float, psi1: float, lo: float,
                            hi: float) -> float:
    """Covariance of the Poisson sum of ``z*`` over ``x in [lo, hi]``.

    Equals ``psi1 int E[z*(tau_a) z*(tau_b)] x^{beta-1} dx`` with
    ``E z*(a) z*(b) = a b/(4x^2) + G(a, b; 2x)/(2x^2)``.
    """
    if hi <= lo:
        return 0.0

    def g(u):
        x = math.exp(u)
        return (tau_a * tau_b / (4 * x * x) + G_overlap(tau_a, tau_b, 2 * x) / (2 * x * x)) * x**beta

    val, _ = integrate.quad(g, math.log(lo), math.log(hi), limit=400, epsabs=0, epsrel=1e-10)
    return psi1 * val


def miss_probability_iso(beta: float, psi1: float, delta: float) -> float:
    """Probability of at least one Poisson point below ``delta``: ``1 - exp(-psi1 delta^beta/beta)``."""
    return -math.expm1(-psi1 * delta**beta / beta)


def simulate_Z_iso(beta: float, psi1: float, tau, trunc: PoissonTruncation | None = None,
                   grid: OUGrid | None = None, seed: int = 0, reps: int = 1,
                   threads: int | None = 1, exact_count: float = DEFAULT_EXACT_ISO) -> ZPath:
    """Sample the iso-sectional intermediate process at ``tau`` (scalar or increasing list)."""
    if not 0.0 < beta < 2.0:
        raise BetaOutOfRange("the iso intermediate process needs 0 < beta < 2")
    if beta == 1.0:
        raise UnsupportedBeta("beta = 1 is excluded")
    if not psi1 > 0 or reps < 1:
        raise InvalidParameter("need psi1 > 0 and reps >= 1")
    taus = _check_taus(tau)
    trunc = trunc or PoissonTruncation()
    grid = grid or OUGrid(DEFAULT_H, max(max(taus), DEFAULT_H))
    K = _iso_K(beta, psi1, trunc, exact_count)
    mu = psi1 * (K**beta - trunc.delta**beta) / beta
    trunc = trunc.with_count(psi1 * (trunc.x_max**beta - trunc.delta**beta) / beta)
    locs, rec = _record_plan(taus, grid)
    m = len(taus)
    cov = np.array([[var_Z_iso_gaussian_part(a, b, beta, psi1, K, trunc.x_max) for b in taus]
                    for a in taus])
    tail_mean = psi1 * (trunc.x_max ** (beta - 1) - K ** (beta - 1)) / (2 * (beta - 1))
    head_mean = psi1 * (K ** (beta - 1) - trunc.delta ** (beta - 1)) / (2 * (beta - 1))
    # Poisson sums: covariance is psi1 int E[f(a) f(b)] dmu, the raw second moment
    tv = np.array(taus)
    if beta > 1:
        mean_vec = np.zeros(m)  # the compensator cancels the complement mean
        shift = -head_mean * tv  # compensator of the exact points
    else:
        mean_vec = tail_mean * tv
        shift = np.zeros(m)
    chol = _psd_factor(cov)

    gens = _draw_generators(seed, _TAG_ISO, reps)
    counts = np.array([g.poisson(mu) for g in gens])
    xs = np.concatenate([_inv_power(g.random(int(k)), trunc.delta, K, beta)
                         for g, k in zip(gens, counts)])
    gauss = np.stack([mean_vec + chol @ g.standard_normal(m) for g in gens])
    base = _rng.derive_key(seed, _TAG_ISO)
    rep_of = np.repeat(np.arange(reps, dtype=np.uint64), counts)
    pt = np.concatenate([np.arange(k, dtype=np.uint64) for k in counts])
    kp = _rng.child_v(_rng.child_v(np.uint64(base), rep_of), pt)
    raw = _run_exact(kp, kp, xs, xs, True, grid, rec, threads)
    vals = _sum_by_rep(_interp_records(raw, locs, rec), counts, m) + gauss + shift
    if taus[0] == 0.0:
        vals[:, 0] = 0.0
    config = {
        "beta": beta, "psi1": psi1, "seed": seed, "reps": reps,
        "truncation": asdict(trunc), "grid": {"h": grid.h, "horizon": grid.horizon},
        "exact_cutoff_K": K, "exact_expected_count": mu,
        "gaussian_var_at_max_tau": float(cov[-1, -1]),
        "miss_probability": miss_probability_iso(beta, psi1, trunc.delta) if beta < 1 else None,
    }
    return ZPath(taus, vals, "Iso", config)
