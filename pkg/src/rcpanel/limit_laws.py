"""Closed-form limit constants and the regime classifier.

The classifier maps a statistic, a tail exponent ``beta`` and a growth rule
``N ~ c n^rho`` to the normalization and limit law that apply.  Case
identifiers follow the scheme ``C3.5-*`` (cross-sectional covariances),
``T4.1-*``/``T4.2`` (temporal covariances), ``T3.1-iii`` (the cross-sectional
intermediate regime) and ``P3.4-*`` (sample mean).
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

from scipy import special

from .errors import (
    BetaOutOfRange,
    InvalidParameter,
    NonIntegrable,
    UnsupportedBeta,
    UnsupportedRegime,
)
from .panel_model import BetaSquared, Degenerate, MixingLaw, mixing_expectation

__all__ = [
    "Statistic",
    "Centering",
    "GrowthRule",
    "GaussianLaw",
    "SymmetricStable",
    "AsymmetricStable",
    "NegSquaredSymmetricStable",
    "SubordinatedBM",
    "IntermediatePoisson",
    "RegimeCase",
    "MeanLimitConstants",
    "const_sigma_inf2",
    "const_c_inf",
    "const_k_inf",
    "const_sigma0",
    "const_c_plus",
    "const_c_star",
    "abs_normal_moment",
    "const_mean_limits",
    "const_sigma2_cross",
    "const_sigma_star_t2",
    "conditional_longrun_var",
    "A_tt",
    "longrun_var_bound",
    "classify",
]

SQRT_PI = math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# Constants


def _psi_scale(psi1: float) -> float:
    if not psi1 > 0:
        raise InvalidParameter("psi1 must be positive")
    return float(psi1)


def const_sigma_inf2(beta: float, psi1: float = 1.0) -> float:
    """``psi1^2 Gamma(beta-1)^2 / (4 (2-beta)(3-2 beta))`` for ``1 < beta < 3/2``."""
    if not 1.0 < beta < 1.5:
        raise BetaOutOfRange("sigma_inf^2 needs 1 < beta < 3/2")
    p = _psi_scale(psi1)
    return p * p * math.gamma(beta - 1) ** 2 / (4.0 * (2 - beta) * (3 - 2 * beta))


def const_c_inf(beta: float, psi1: float = 1.0) -> float:
    """``psi1^2 2^{1-2 beta} Gamma(beta+1/2) Gamma(1-beta) / sqrt(pi)`` for ``0 < beta < 1``."""
    if not 0.0 < beta < 1.0:
        raise BetaOutOfRange("c_inf needs 0 < beta < 1")
    p = _psi_scale(psi1)
    return p * p * 2.0 ** (1 - 2 * beta) * math.gamma(beta + 0.5) * math.gamma(1 - beta) / SQRT_PI


def const_k_inf(beta: float) -> float:
    """``2 E int_0^inf z^{beta-1} (1 - exp(-Z^2/(8z))) dz`` in closed form.

    Equals ``2^{1-2 beta} Gamma(beta+1/2) Gamma(1-beta) / (sqrt(pi) beta)``, so
    ``const_c_inf(beta, psi1) / (psi1^2 k_inf) = beta``.
    """
    if not 0.0 < beta < 1.0:
        raise BetaOutOfRange("k_inf needs 0 < beta < 1")
    return 2.0 ** (1 - 2 * beta) * math.gamma(beta + 0.5) * math.gamma(1 - beta) / (SQRT_PI * beta)


def const_sigma0(beta: float, psi1: float = 1.0) -> float:
    """``psi1^2 2^{-2 beta/3} Gamma(1 - 2 beta/3) B(beta/3, beta/3) / (2 beta)`` for ``0 < beta < 3/2``."""
    if not 0.0 < beta < 1.5:
        raise BetaOutOfRange("sigma0 needs 0 < beta < 3/2")
    p = _psi_scale(psi1)
    b = beta / 3.0
    return (p * p * 2.0 ** (-2 * beta / 3) * math.gamma(1 - 2 * beta / 3)
            * math.exp(special.betaln(b, b)) / (2 * beta))


def _check_stable_beta(beta: float):
    if not (0.0 < beta < 2.0) or beta == 1.0:
        raise BetaOutOfRange("needs 0 < beta < 2 and beta != 1")


def const_c_plus(beta: float, psi1: float = 1.0) -> float:
    """``psi1 Gamma(2-beta) cos(pi beta/2) / (2^beta beta (1-beta))``."""
    _check_stable_beta(beta)
    p = _psi_scale(psi1)
    return p * math.gamma(2 - beta) * math.cos(math.pi * beta / 2) / (2.0**beta * beta * (1 - beta))


def abs_normal_moment(p: float) -> float:
    """``E|Z|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi)``."""
    return 2.0 ** (p / 2) * math.gamma((p + 1) / 2) / SQRT_PI


def const_c_star(beta: float, psi1: float = 1.0) -> float:
    """``c_plus * E|Z|^{2 beta}``."""
    return const_c_plus(beta, psi1) * abs_normal_moment(2 * beta)


@dataclass(frozen=True)
class MeanLimitConstants:
    """Scale constants of the sample-mean limits; ``None`` where not defined."""

    beta: float
    psi1: float | None
    sigma_bar2_beta: float | None = None
    K_bar: float | None = None
    k_bar: float | None = None
    sigma_bar2: float | None = None


def const_mean_limits(beta: float, mixing: MixingLaw | None = None,
                      psi1: float | None = None) -> MeanLimitConstants:
    """Constants of the sample-mean limits that exist at ``beta``.

    ``sigma_bar2_beta`` (``1 < beta < 2``), ``K_bar`` (``0 < beta < 1``),
    ``k_bar`` (``0 < beta < 2``) need ``psi1``; ``sigma_bar2 = E(1-a)^{-2}``
    (``beta > 2``) needs the mixing law.
    """
    if psi1 is None and isinstance(mixing, BetaSquared):
        psi1 = mixing.psi1
    vals = {}
    if psi1 is not None:
        p = _psi_scale(psi1)
        if 1.0 < beta < 2.0:
            vals["sigma_bar2_beta"] = p * math.gamma(beta - 1) / ((3 - beta) * (2 - beta))
        if 0.0 < beta < 1.0:
            vals["K_bar"] = p * 4.0 ** (-beta) * math.gamma(1 - beta) / beta
        if 0.0 < beta < 2.0:
            vals["k_bar"] = p * 2.0 ** (-beta / 2) * math.gamma(1 - beta / 2) / beta
    if mixing is not None and (isinstance(mixing, Degenerate) or beta > 2.0):
        vals["sigma_bar2"] = mixing_expectation(mixing, lambda a, w: (1 + a) ** 2 / (w * w))
    return MeanLimitConstants(beta, psi1, **vals)


def _tail(mixing: MixingLaw) -> float:
    return math.inf if isinstance(mixing, Degenerate) else mixing.beta


def conditional_longrun_var(a_i: float, a_j: float, cum4: float = 0.0,
                            same_row: bool = False) -> float:
    """Limit of ``n^{-1} var[sum_t X_i(t) X_j(t) | a_i, a_j]``.

    Distinct rows: ``(1 + a_i a_j) / ((1 - a_i^2)(1 - a_j^2)(1 - a_i a_j))``.
    Same row: ``(1+a^2)/(1-a^2) (2/(1-a^2)^2 + cum4/(1-a^4))`` with ``a = a_i``.
    """
    if same_row:
        return A_tt(a_i, 0, cum4)
    w1, w2 = 1.0 - a_i * a_i, 1.0 - a_j * a_j
    one_minus = 0.5 * (w1 + w2) + 0.5 * (a_i - a_j) ** 2
    return (1.0 + a_i * a_j) / (w1 * w2 * one_minus)


def A_tt(a: float, t: int = 0, cum4: float = 0.0) -> float:
    """Long-run conditional variance of the lag-``t`` products of one row."""
    t = abs(int(t))
    w = 1.0 - a * a
    a2t = a ** (2 * t)
    return (1 + a * a) / w * ((1 + a2t) / (w * w) + a2t * (2 * t + cum4) / (w * (1 + a * a)))


def longrun_var_bound(a_i: float, a_j: float, n: int, cum4: float = 0.0,
                      same_row: bool = False) -> float:
    """Finite-``n`` upper bound ``C n^2 / ((1-a_i)(1-a_j)) min(1, 1/(n (2 - a_i - a_j)))``."""
    c = 2.0 * (2.0 + abs(cum4)) if same_row else 4.0
    return c * n * n / ((1 - a_i) * (1 - a_j)) * min(1.0, 1.0 / (n * (2 - a_i - a_j)))


def const_sigma2_cross(mixing: MixingLaw, innovation=None) -> float:
    """``sigma^2 = E A_12`` over two independent coefficients (finite for ``beta > 3/2``).

    The innovation law does not enter: cross-row products involve only second
    moments.
    """
    if isinstance(mixing, Degenerate):
        return conditional_longrun_var(mixing.a0, mixing.a0)
    if mixing.beta <= 1.5:
        raise NonIntegrable("E A_12 is infinite for beta <= 3/2")

    def inner(a1, w1):
        def g(a2, w2):
            return (1 + a1 * a2) / (w1 * w2 * (0.5 * (w1 + w2) + 0.5 * (a1 - a2) ** 2))

        return mixing_expectation(mixing, g, epsabs=1e-11, epsrel=1e-9)

    return mixing_expectation(mixing, inner, epsabs=1e-10, epsrel=1e-8)


def const_sigma_star_t2(mixing: MixingLaw, t: int = 0) -> float:
    """``var(a^|t| / (1 - a^2))`` (finite for ``beta > 2``)."""
    if isinstance(mixing, Degenerate):
        return 0.0
    if mixing.beta <= 2.0:
        raise NonIntegrable("var(a^t/(1-a^2)) is infinite for beta <= 2")
    t = abs(int(t))
    m1 = mixing_expectation(mixing, lambda a, w: a**t / w)
    m2 = mixing_expectation(mixing, lambda a, w: a ** (2 * t) / (w * w))
    return m2 - m1 * m1


# ---------------------------------------------------------------------------
# Limit laws


class Statistic(str, enum.Enum):
    CROSS = "CrossCov"
    TEMPORAL = "TemporalCov"
    MEAN = "Mean"


class Centering(str, enum.Enum):
    NONE = "None"
    TRUE_GAMMA = "TrueGamma"
    TRUE_GAMMA_IF_BETA_GT1 = "TrueGammaIfBetaGt1"


@dataclass(frozen=True)
class GrowthRule:
    """``N ~ c n^rho``."""

    rho: float
    c: float = 1.0

    def __post_init__(self):
        if not self.rho > 0 or not self.c > 0:
            raise InvalidParameter("growth rule needs rho > 0 and c > 0")

    def N_for(self, n: int) -> int:
        return max(1, int(math.floor(self.c * n**self.rho)))


@dataclass(frozen=True)
class GaussianLaw:
    variance: float | None
    kind: str = "Gaussian"


@dataclass(frozen=True)
class SymmetricStable:
    """Characteristic function ``exp(-c |theta|^alpha)``."""

    alpha: float
    c: float | None
    kind: str = "SymmetricStable"


@dataclass(frozen=True)
class AsymmetricStable:
    """Characteristic function ``exp(-c |theta|^alpha (1 - i sign(theta) tan(pi alpha / 2)))``."""

    alpha: float
    c: float | None
    kind: str = "AsymmetricStable"


@dataclass(frozen=True)
class NegSquaredSymmetricStable:
    """Law of ``-V^2`` with ``V`` symmetric stable, ``E exp(i theta V) = exp(-c |theta|^alpha)``."""

    alpha: float
    c: float | None
    kind: str = "NegSquaredSymmetricStable"


@dataclass(frozen=True)
class SubordinatedBM:
    sigma0: float | None
    beta: float
    kind: str = "SubordinatedBM"


@dataclass(frozen=True)
class IntermediatePoisson:
    """Intermediate Poisson limit; ``lam_inf`` is the limit of the rate ratio."""

    process: str  # "Cross", "Iso" or "Mean"
    lam_inf: float | None
    beta: float | None = None
    psi1: float | None = None
    kind: str = "IntermediatePoisson"


LimitLaw = (GaussianLaw | SymmetricStable | AsymmetricStable | NegSquaredSymmetricStable
            | SubordinatedBM | IntermediatePoisson)


@dataclass(frozen=True)
class RegimeCase:
    """Normalization ``N^p_N n^p_n`` (optionally divided by a log factor) and the limit law."""

    statistic: Statistic
    case_id: str
    p_N: float
    p_n: float
    limit: object
    centering: Centering
    beta: float
    log_factor: bool = False
    note: str = ""
    extra: dict = field(default_factory=dict)

    def scale(self, N: int, n: int) -> float:
        """Normalizing factor at realized sizes; the log factor uses the realized ``lambda``."""
        s = float(N) ** self.p_N * float(n) ** self.p_n
        if self.log_factor:
            lam = N ** (1.0 / (2 * self.beta)) / n
            if lam <= 1.0:
                raise InvalidParameter("log normalization needs N^{1/(2 beta)} > n")
            s /= math.log(lam) ** (1.0 / (2 * self.beta))
        return s

    def to_dict(self) -> dict:
        d = asdict(self)
        d["statistic"] = self.statistic.value
        d["centering"] = self.centering.value
        return d


_REL = 1e-12


def _compare(rho: float, boundary: float) -> int:
    if math.isclose(rho, boundary, rel_tol=_REL, abs_tol=0.0):
        return 0
    return 1 if rho > boundary else -1


def _unsupported_beta(beta, values):
    return any(math.isclose(beta, v, rel_tol=_REL) for v in values)


def classify(statistic, beta: float, growth: GrowthRule, psi1: float | None = None,
             mixing: MixingLaw | None = None, t: int = 0) -> RegimeCase:
    """Regime, normalization and limit law for ``statistic`` at tail exponent ``beta``.

    Constants needing ``psi1`` are filled when ``psi1`` (or a ``BetaSquared``
    mixing law) is given; Gaussian variances that are mixing-law expectations
    are filled when ``mixing`` is given.  Everything else is ``None``.
    """
    stat = Statistic(statistic)
    if not beta > 0:
        raise InvalidParameter("beta must be positive")
    if psi1 is None and isinstance(mixing, BetaSquared):
        psi1 = mixing.psi1
    if stat is Statistic.MEAN:
        return _classify_mean(beta, growth, psi1, mixing)
    if stat is Statistic.TEMPORAL:
        return _classify_temporal(beta, growth, psi1, mixing, t)
    return _classify_cross(beta, growth, psi1, mixing)


def _maybe(fn, *args):
    try:
        return fn(*args) if all(a is not None for a in args) else None
    except (BetaOutOfRange, NonIntegrable):
        return None


def _classify_mean(beta, growth, psi1, mixing):
    if _unsupported_beta(beta, (1.0, 2.0)):
        raise UnsupportedBeta("beta = 1 and beta = 2 are excluded")
    stat, cen = Statistic.MEAN, Centering.NONE
    consts = const_mean_limits(beta, mixing, psi1)
    if beta > 2:
        return RegimeCase(stat, "P3.4-iv", 0.5, 0.5, GaussianLaw(consts.sigma_bar2), cen, beta)
    cmp = _compare(growth.rho, beta)
    if cmp == 0:
        return RegimeCase(stat, "P3.4-int", 1 - 1 / beta, 0.5,
                          IntermediatePoisson("Mean", growth.c ** (1 / beta), beta, psi1), cen,
                          beta, note="no closed-form constants for this regime")
    if cmp > 0 and beta > 1:
        return RegimeCase(stat, "P3.4-i", 0.5, (beta - 1) / 2,
                          GaussianLaw(consts.sigma_bar2_beta), cen, beta)
    if cmp > 0:
        return RegimeCase(stat, "P3.4-ii", 1 - 1 / (2 * beta), 0.0,
                          SymmetricStable(2 * beta, consts.K_bar), cen, beta)
    return RegimeCase(stat, "P3.4-iii", 1 - 1 / beta, 0.5,
                      SymmetricStable(beta, consts.k_bar), cen, beta)


def _classify_temporal(beta, growth, psi1, mixing, t):
    if _unsupported_beta(beta, (1.0, 2.0)):
        raise UnsupportedBeta("beta = 1 and beta = 2 are excluded")
    stat = Statistic.TEMPORAL
    if beta > 2:
        var = _maybe(const_sigma_star_t2, mixing, t)
        return RegimeCase(stat, "T4.2", 0.5, 0.0, GaussianLaw(var), Centering.TRUE_GAMMA, beta)
    cen = Centering.TRUE_GAMMA_IF_BETA_GT1
    cmp = _compare(growth.rho, beta)
    extra = {"partial_sum_scale": "n^-1 N^(-1/beta)"}
    if cmp > 0:
        return RegimeCase(stat, "T4.1-i", 1 - 1 / beta, 0.0,
                          AsymmetricStable(beta, _maybe(const_c_star, beta, psi1)), cen, beta,
                          extra=extra)
    if cmp < 0:
        return RegimeCase(stat, "T4.1-ii", 1 - 1 / beta, 0.0,
                          AsymmetricStable(beta, _maybe(const_c_plus, beta, psi1)), cen, beta,
                          extra=extra)
    return RegimeCase(stat, "T4.1-iii", 1 - 1 / beta, 0.0,
                      IntermediatePoisson("Iso", growth.c ** (1 / beta), beta, psi1), cen, beta,
                      extra=extra)


def _classify_cross(beta, growth, psi1, mixing):
    if _unsupported_beta(beta, (0.5, 0.75, 1.0, 1.5, 2.0)):
        raise UnsupportedBeta("beta in {1/2, 3/4, 1, 3/2, 2} is excluded for cross covariances")
    stat, cen = Statistic.CROSS, Centering.NONE
    rho = growth.rho

    def case(cid, p_N, p_n, limit, **kw):
        return RegimeCase(stat, cid, p_N, p_n, limit, cen, beta, **kw)

    if beta > 1.5:
        return case("C3.5-xi", 0.5, 0.5, GaussianLaw(_maybe(const_sigma2_cross, mixing)))

    W = SymmetricStable(4 * beta / 3, None if psi1 is None
                        else const_sigma0(beta, psi1) / 2.0 ** (2 * beta / 3))
    w_norm = (1 - 3 / (4 * beta), 0.5)
    consts = const_mean_limits(beta, None, psi1)

    def case3(cid):
        return case(cid, 2 - 1 / beta, 0.0, NegSquaredSymmetricStable(2 * beta, consts.K_bar))

    def case9(cid):
        return case(cid, 2 - 2 / beta, 0.0, NegSquaredSymmetricStable(beta, consts.k_bar))

    c2b = _compare(rho, 2 * beta)
    cb = _compare(rho, beta)
    if beta > 0.5 and c2b == 0:
        return case("T3.1-iii", *w_norm,
                    IntermediatePoisson("Cross", growth.c ** (1 / (2 * beta)), beta, psi1))
    if beta > 1.0:
        if c2b > 0:
            return case("C3.5-i", 0.5, beta - 1, GaussianLaw(_maybe(const_sigma_inf2, beta, psi1)))
    elif beta > 0.5:
        if c2b > 0:
            return case("C3.5-ii", 1 - 1 / (2 * beta), 0.0,
                        SymmetricStable(2 * beta, _maybe(const_c_inf, beta, psi1)), log_factor=True)
    else:
        if c2b > 0:
            return case3("C3.5-iii")
        if c2b == 0:
            return case3("C3.5-iii+vii")
    if beta > 0.75:
        if cb > 0:
            return case("C3.5-iv", *w_norm, W)
        if cb < 0:
            return case("C3.5-viii", *w_norm, W)
        return case("C3.5-iv+viii", *w_norm, W)
    # 0 < beta < 3/4
    b1 = 2 * beta / (4 * beta - 1) if beta > 0.5 else math.inf
    b2 = 2 * beta / (5 - 4 * beta)
    if beta > 0.5:
        c1 = _compare(rho, b1)
        if c1 > 0:
            return case("C3.5-v", *w_norm, W)
        if c1 == 0:
            raise UnsupportedRegime("both terms contribute at N ~ n^{2 beta/(4 beta - 1)}")
        if cb > 0:
            return case3("C3.5-vi")
    elif cb > 0:
        return case3("C3.5-vii")
    if cb == 0:
        raise UnsupportedRegime("the sample-mean term has no closed-form limit at N ~ n^beta")
    c2 = _compare(rho, b2)
    if c2 > 0:
        return case9("C3.5-ix")
    if c2 == 0:
        raise UnsupportedRegime("both terms contribute at N ~ n^{2 beta/(5 - 4 beta)}")
    return case("C3.5-x", *w_norm, W)
