"""Sample statistics of a panel and the confidence intervals built on them.

Every statistic accepts either a materialized :class:`~rcpanel.panel_model.Panel`
or a :class:`PanelSummary`.  A summary holds the per-row sums and lag products
that the statistics need, so a large panel can be simulated and reduced by
the compiled kernel without ever being stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as sps

from . import _backend, _parallel, _rng
from .errors import (
    InvalidMode,
    InvalidParameter,
    LagOutOfRange,
    NoExceedances,
    TailEstimateOutOfRange,
    TauOutOfRange,
)
from .panel_model import (
    A_CAP,
    MA_MAX_TERMS,
    MA_TOL,
    Gaussian,
    InnovationLaw,
    MixingLaw,
    Panel,
    sample_coefficients,
)

__all__ = [
    "CovarianceLag",
    "TailEstimate",
    "ConfidenceInterval",
    "PanelSummary",
    "summarize_panel",
    "simulate_summary",
    "sample_mean",
    "sample_cov",
    "partial_sum_process",
    "sigma_star_hat",
    "estimate_tail",
    "tail_from_coefficients",
    "confidence_interval_gamma",
    "CI_MODES",
]

CI_MODES = ("Gaussian", "StableStar", "StablePlus")


@dataclass(frozen=True)
class CovarianceLag:
    """Temporal lag ``t`` and cross-sectional lag ``s``."""

    t: int = 0
    s: int = 0

    def canonical(self) -> tuple[int, int]:
        """Equivalent lag with ``s >= 0``, and ``t >= 0`` when ``s == 0``."""
        t, s = int(self.t), int(self.s)
        if s < 0:
            t, s = -t, -s
        if s == 0:
            t = abs(t)
        return t, s


def _lag(lag) -> CovarianceLag:
    if isinstance(lag, CovarianceLag):
        return lag
    t, s = lag
    return CovarianceLag(int(t), int(s))


@dataclass(frozen=True)
class TailEstimate:
    beta_hat: float
    psi_hat: float
    u0: float
    k_used: int


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    mode: str
    regime: str
    center: float
    beta: float | None = None
    psi: float | None = None

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower


# ---------------------------------------------------------------------------
# Fused summaries


@dataclass(frozen=True)
class PanelSummary:
    """Per-row reductions of a panel.

    ``prod[l, c, j]`` is the sum over ``u <= cuts[c]`` of
    ``X_j(u) X_{j+s}(u+t)`` for lag ``lags[l] = (t, s)``, over the indices
    where both factors exist.  The last cut is always ``n``, so the last
    slice holds the full-range products used by the sample covariances.
    """

    n_rows: int
    n_cols: int
    lags: tuple
    cuts: tuple
    row_sum: np.ndarray
    head: np.ndarray
    tail: np.ndarray
    prod: np.ndarray
    coefficients: np.ndarray

    def lag_index(self, t: int, s: int) -> int:
        try:
            return self.lags.index((t, s))
        except ValueError:
            raise LagOutOfRange(f"lag (t={t}, s={s}) was not summarized") from None

    def products(self, t: int, s: int, cut: int | None = None) -> np.ndarray:
        """Per-row products for canonical lag ``(t, s)`` (rows ``0 .. N-s-1``)."""
        li = self.lag_index(t, s)
        ci = len(self.cuts) - 1 if cut is None else self.cuts.index(cut)
        return self.prod[li, ci, : self.n_rows - s]


def _normalize_request(lags, cuts, n_cols):
    canon = []
    for lag in lags:
        t, s = _lag(lag).canonical()
        if abs(t) >= n_cols:
            raise LagOutOfRange(f"|t|={abs(t)} must be < n={n_cols}")
        if (t, s) not in canon:
            canon.append((t, s))
    cut_list = sorted({int(c) for c in (cuts or ())} | {int(n_cols)})
    if cut_list[0] < 0:
        raise TauOutOfRange("cuts must be non-negative")
    head = max([abs(t) for t, _ in canon], default=0)
    return canon, cut_list, head


def summarize_panel(panel: Panel, lags: Sequence = ((0, 0),), cuts: Sequence = ()) -> PanelSummary:
    """Reduce a materialized panel with the same arithmetic as the fused kernel."""
    from ._fallback import _lag_products

    x = panel.values
    N, n = x.shape
    canon, cut_list, head = _normalize_request(lags, cuts, n)
    prod = np.zeros((len(canon), len(cut_list), N))
    for l, (t, s) in enumerate(canon):
        if s >= N:
            raise LagOutOfRange(f"s={s} must be < N={N}")
        if s == 0:
            prod[l] = _lag_products(x, x, t, n, cut_list)
        else:
            prod[l, :, : N - s] = _lag_products(x[: N - s], x[s:], t, n, cut_list)
    return PanelSummary(N, n, tuple(canon), tuple(cut_list),
                        np.cumsum(x, axis=1)[:, -1].copy(), x[:, :head].copy(),
                        x[:, n - head:].copy(), prod, np.asarray(panel.coefficients))


def simulate_summary(N: int, n: int, mixing: MixingLaw, innovation: InnovationLaw = Gaussian(),
                     seed: int = 0, lags: Sequence = ((0, 0),), cuts: Sequence = (),
                     threads: int | None = 1, tol: float = MA_TOL) -> PanelSummary:
    """Simulate a panel and reduce it on the fly.

    The result equals ``summarize_panel(simulate_panel(...))`` for the same
    arguments up to floating-point summation order.
    """
    if N < 1 or n < 1:
        raise InvalidParameter("N and n must be positive")
    canon, cut_list, head = _normalize_request(lags, cuts, n)
    for _, s in canon:
        if s >= N:
            raise LagOutOfRange(f"s={s} must be < N={N}")
    a = sample_coefficients(mixing, N, seed)
    row_sum = np.zeros(N)
    hd = np.zeros((N, head))
    tl = np.zeros((N, head))
    prod = np.zeros((len(canon), len(cut_list), N))
    lag_t = np.array([t for t, _ in canon], dtype=np.int64)
    lag_s = np.array([s for _, s in canon], dtype=np.int64)
    cut_arr = np.array(cut_list, dtype=np.int64)
    base = _rng.derive_key(seed)
    kern = _backend.kernels()

    def work(lo, hi):
        kern.summarize_rows(base, lo, hi, N, a, n, innovation.kind, innovation.nu,
                            innovation.tscale, tol, MA_MAX_TERMS, lag_t, lag_s, cut_arr,
                            row_sum, hd, tl, prod)

    _parallel.run_ranges(work, N, threads)
    return PanelSummary(N, n, tuple(canon), tuple(cut_list), row_sum, hd, tl, prod, a)


# ---------------------------------------------------------------------------
# Statistics


def sample_mean(data) -> float:
    """``(1/(N n)) sum_i sum_t X_i(t)``."""
    if isinstance(data, PanelSummary):
        return float(np.sum(data.row_sum) / (data.n_rows * data.n_cols))
    return float(np.mean(data.values))


def _check_lag(t, s, N, n):
    if abs(t) >= n or abs(s) >= N:
        raise LagOutOfRange(f"lag (t={t}, s={s}) out of range for N={N}, n={n}")


def sample_cov(data, lag=(0, 0)) -> float:
    """Sample covariance at lag ``(t, s)`` with the fixed ``1/(N n)`` normalization.

    The sum runs over ``1 <= i, i+s <= N`` and ``1 <= k, k+t <= n`` and is
    centered at the overall sample mean.
    """
    lag = _lag(lag)
    if isinstance(data, PanelSummary):
        return _sample_cov_summary(data, lag)
    x = data.values
    N, n = x.shape
    _check_lag(lag.t, lag.s, N, n)
    t, s = lag.canonical()
    y = x - np.mean(x)
    lhs, rhs = y[: N - s], y[s:]
    if t >= 0:
        total = np.sum(lhs[:, : n - t] * rhs[:, t:])
    else:
        total = np.sum(lhs[:, -t:] * rhs[:, : n + t])
    return float(total / (N * n))


def _sample_cov_summary(sm: PanelSummary, lag: CovarianceLag) -> float:
    N, n = sm.n_rows, sm.n_cols
    _check_lag(lag.t, lag.s, N, n)
    t, s = lag.canonical()
    m = abs(t)
    xbar = sample_mean(sm)
    p = np.sum(sm.products(t, s))
    first = sm.head[:, :m].sum(axis=1)
    last = sm.tail[:, sm.tail.shape[1] - m:].sum(axis=1) if m else np.zeros(N)
    if t >= 0:
        a1 = np.sum(sm.row_sum[: N - s] - last[: N - s])
        a2 = np.sum(sm.row_sum[s:] - first[s:])
    else:
        a1 = np.sum(sm.row_sum[: N - s] - first[: N - s])
        a2 = np.sum(sm.row_sum[s:] - last[s:])
    count = (N - s) * (n - m)
    return float((p - xbar * (a1 + a2) + xbar * xbar * count) / (N * n))


def partial_sum_process(data, lag, taus: Sequence[float], n: int | None = None) -> list[float]:
    """Uncentered partial sums ``S(tau) = sum_i sum_{u <= floor(n tau)} X_i(u) X_{i+s}(u+t)``.

    ``n`` is the nominal sample length; it defaults to the number of columns.
    A panel simulated with ``n + t`` columns lets ``S(1)`` use ``X(n + t)``.
    """
    lag = _lag(lag)
    t, s = int(lag.t), int(lag.s)
    if isinstance(data, PanelSummary):
        N, n_cols = data.n_rows, data.n_cols
    else:
        N, n_cols = data.values.shape
    n = n_cols if n is None else int(n)
    if abs(s) >= N:
        raise LagOutOfRange(f"s={s} must be < N={N}")
    cuts = []
    for tau in taus:
        if not 0.0 <= tau <= 1.0:
            raise TauOutOfRange(f"tau={tau} outside [0, 1]")
        m = int(math.floor(n * tau + 1e-12))
        if m + max(t, 0) > n_cols:
            raise TauOutOfRange(f"tau={tau} needs column {m + max(t, 0)} > {n_cols}")
        cuts.append(m)
    if isinstance(data, PanelSummary):
        ct, cs = lag.canonical()
        if (ct, cs) != (t, s):
            raise LagOutOfRange("summaries store partial sums for s >= 0 only")
        return [float(np.sum(data.products(t, s, m))) if m > 0 else 0.0 for m in cuts]
    x = data.values
    rows_lo = x[max(0, -s): N - max(0, s)]
    rows_hi = x[max(0, s): N + min(0, s)]
    u_lo = max(1, 1 - t)
    out = []
    for m in cuts:
        u_hi = min(m, n_cols - t)
        if u_hi < u_lo:
            out.append(0.0)
            continue
        block = rows_lo[:, u_lo - 1:u_hi] * rows_hi[:, u_lo - 1 + t:u_hi + t]
        out.append(float(np.sum(block)))
    return out


def _row_products(data, t: int) -> tuple[np.ndarray, int, int]:
    if isinstance(data, PanelSummary):
        return data.products(t, 0), data.n_rows, data.n_cols
    x = data.values
    N, n = x.shape
    return np.sum(x[:, : n - t] * x[:, t:], axis=1), N, n


def sigma_star_hat(data, t: int = 0) -> float:
    """Cross-row variance of the per-row lag-``t`` autocovariances.

    ``(1/N) sum_i q_i^2 - ((1/N) sum_i q_i)^2`` with
    ``q_i = (1/n) sum_{k <= n-t} X_i(k) X_i(k+t)``, evaluated in two passes.
    """
    t = int(t)
    n_cols = data.n_cols if isinstance(data, PanelSummary) else data.values.shape[1]
    if not 0 <= t < n_cols:
        raise LagOutOfRange(f"t={t} must satisfy 0 <= t < n")
    prods, N, n = _row_products(data, t)
    q = prods / n
    return float(np.mean((q - np.mean(q)) ** 2))


def tail_from_coefficients(a: np.ndarray, u0: float = 0.1) -> TailEstimate:
    """Threshold estimator of ``(beta, psi1)`` from coefficients ``a``.

    With ``U = 1 - a`` and ``K`` exceedances ``U < u0``:
    ``beta_hat = K / sum log(u0 / U)`` and ``psi_hat = beta_hat K / (N u0^beta_hat)``.
    """
    if not 0.0 < u0 < 1.0:
        raise InvalidParameter("u0 must lie in (0, 1)")
    a = np.clip(np.asarray(a, dtype=float), 0.0, A_CAP)
    u = 1.0 - a
    exc = u[u < u0]
    k = exc.size
    if k == 0:
        raise NoExceedances(f"no coefficient estimate exceeds 1 - u0 = {1 - u0}")
    beta_hat = k / float(np.sum(np.log(u0 / exc)))
    psi_hat = beta_hat * k / (a.size * u0**beta_hat)
    return TailEstimate(beta_hat, psi_hat, u0, k)


def estimate_tail(data, u0: float = 0.1) -> TailEstimate:
    """Tail estimate from per-row lag-1 autoregression fits."""
    p1, N, _ = _row_products(data, 1)
    p0, _, _ = _row_products(data, 0)
    if N < 50:
        raise InvalidParameter("estimate_tail needs N >= 50")
    with np.errstate(invalid="ignore", divide="ignore"):
        a_hat = np.where(p0 > 0, p1 / p0, 0.0)
    return tail_from_coefficients(a_hat, u0)


def confidence_interval_gamma(data, t: int = 0, level: float = 0.9, mode: str = "Gaussian",
                              beta: float | None = None, psi: float | None = None,
                              u0: float = 0.1) -> ConfidenceInterval:
    """Asymptotic confidence interval for ``gamma(t)``.

    ``Gaussian``: ``gamma_hat +- z sqrt(sigma_star_hat / N)`` (for ``beta > 2``).
    ``StableStar``/``StablePlus``: ``[gamma_hat - N^{1/b - 1} q(1 - a/2),
    gamma_hat - N^{1/b - 1} q(a/2)]`` with ``q`` the quantiles of the
    completely asymmetric ``b``-stable law with scale ``c*`` or ``c+``.
    ``beta``/``psi`` override the tail estimate (both must be given).
    """
    if mode not in CI_MODES:
        raise InvalidMode(f"mode must be one of {CI_MODES}")
    if not 0.0 < level < 1.0:
        raise InvalidParameter("level must lie in (0, 1)")
    alpha = 1.0 - level
    g = sample_cov(data, (t, 0))
    N = data.n_rows if isinstance(data, PanelSummary) else data.values.shape[0]
    if mode == "Gaussian":
        z = float(sps.norm.ppf(1.0 - alpha / 2.0))
        half = z * math.sqrt(max(sigma_star_hat(data, t), 0.0) / N)
        return ConfidenceInterval(g - half, g + half, level, mode, "T4.2", g)

    from . import limit_laws, stable_dist

    if (beta is None) != (psi is None):
        raise InvalidParameter("give both beta and psi, or neither")
    if beta is None:
        est = estimate_tail(data, u0)
        beta, psi = est.beta_hat, est.psi_hat
    if not 1.0 < beta < 2.0:
        raise TailEstimateOutOfRange(f"stable intervals need 1 < beta < 2, got {beta:.4g}")
    if mode == "StableStar":
        c, regime = limit_laws.const_c_star(beta, psi), "T4.1-i"
    else:
        c, regime = limit_laws.const_c_plus(beta, psi), "T4.1-ii"
    law = stable_dist.StableParams(beta, 1.0, c ** (1.0 / beta), 0.0)
    q_hi = stable_dist.quantile(law, 1.0 - alpha / 2.0)
    q_lo = stable_dist.quantile(law, alpha / 2.0)
    f = N ** (1.0 / beta - 1.0)
    return ConfidenceInterval(g - f * q_hi, g - f * q_lo, level, mode, regime, g, beta, psi)
