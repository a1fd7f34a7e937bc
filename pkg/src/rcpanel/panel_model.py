"""Stationary RCAR(1) panels and exact model-level quantities.

Each row follows ``X(t) = a X(t-1) + eps(t)`` with its own coefficient ``a``
drawn once from the mixing law and a stationary start ``X(0)``.  The mixing
laws are ``BetaSquared(alpha, beta)``, meaning ``a**2 ~ Beta(alpha, beta)``,
and the point mass ``Degenerate(a0)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np
from scipy import integrate, special

from . import _backend, _parallel, _rng
from .errors import DegenerateHasNoTail, InfiniteCovariance, InvalidBeta, InvalidParameter

__all__ = [
    "BetaSquared",
    "Degenerate",
    "Gaussian",
    "StudentT",
    "Rademacher",
    "Panel",
    "A_CAP",
    "sample_coefficients",
    "sample_coefficient",
    "psi_at_one",
    "stationary_initial",
    "simulate_panel",
    "mixing_expectation",
    "true_gamma",
    "gamma_asymptote",
    "write_panel_csv",
    "read_panel_csv",
]

A_CAP = 1.0 - 2.0**-40
MA_TOL = 1e-10
MA_MAX_TERMS = 4096


# ---------------------------------------------------------------------------
# Laws


@dataclass(frozen=True)
class BetaSquared:
    """Mixing law with ``a**2 ~ Beta(alpha, beta)``.

    The density of ``a`` behaves like ``psi1 * (1 - x)**(beta - 1)`` at the
    unit root, so ``beta`` is the tail exponent and ``psi1 = 2**beta / B(alpha, beta)``.
    """

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise InvalidParameter("BetaSquared needs alpha > 0 and beta > 0")

    @property
    def tail_beta(self) -> float:
        return float(self.beta)

    @property
    def psi1(self) -> float:
        return math.exp(self.beta * math.log(2.0) - special.betaln(self.alpha, self.beta))

    def density(self, x):
        """Density of ``a`` on (0, 1)."""
        x = np.asarray(x, dtype=float)
        u = x * x
        logf = ((self.alpha - 1) * np.log(u) + (self.beta - 1) * np.log1p(-u)
                - special.betaln(self.alpha, self.beta))
        return 2.0 * x * np.exp(logf)

    def to_dict(self) -> dict:
        return {"law": "BetaSquared", "alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class Degenerate:
    """Point mass at ``a0``."""

    a0: float

    def __post_init__(self):
        if not (0.0 <= self.a0 < 1.0):
            raise InvalidParameter("Degenerate needs 0 <= a0 < 1")

    @property
    def tail_beta(self) -> float:
        return math.inf

    @property
    def psi1(self) -> float:
        raise DegenerateHasNoTail("a point mass has no unit-root tail")

    def to_dict(self) -> dict:
        return {"law": "Degenerate", "a0": self.a0}


MixingLaw = Union[BetaSquared, Degenerate]


@dataclass(frozen=True)
class Gaussian:
    """Standard normal innovations."""

    cum4 = 0.0
    kind = 0

    @property
    def tscale(self) -> float:
        return 0.0

    @property
    def nu(self) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {"law": "Gaussian"}


@dataclass(frozen=True)
class StudentT:
    """Student-t innovations rescaled to unit variance (requires ``nu > 4``)."""

    nu: float
    kind = 1

    def __post_init__(self):
        if not self.nu > 4:
            raise InvalidParameter("StudentT needs nu > 4 for a finite 4th cumulant")

    @property
    def cum4(self) -> float:
        return 6.0 / (self.nu - 4.0)

    @property
    def tscale(self) -> float:
        return math.sqrt((self.nu - 2.0) / self.nu)

    def to_dict(self) -> dict:
        return {"law": "StudentT", "nu": self.nu}


@dataclass(frozen=True)
class Rademacher:
    """Symmetric +-1 innovations."""

    cum4 = -2.0
    kind = 2

    @property
    def tscale(self) -> float:
        return 0.0

    @property
    def nu(self) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {"law": "Rademacher"}


InnovationLaw = Union[Gaussian, StudentT, Rademacher]


def law_from_dict(d: dict):
    kind = d["law"]
    if kind == "BetaSquared":
        return BetaSquared(float(d["alpha"]), float(d["beta"]))
    if kind == "Degenerate":
        return Degenerate(float(d["a0"]))
    if kind == "Gaussian":
        return Gaussian()
    if kind == "StudentT":
        return StudentT(float(d["nu"]))
    if kind == "Rademacher":
        return Rademacher()
    raise InvalidParameter(f"unknown law {kind!r}")


# ---------------------------------------------------------------------------
# Sampling


def _base_key(seed: int) -> int:
    return _rng.derive_key(seed)


def sample_coefficients(law: MixingLaw, size: int, seed: int, start: int = 0) -> np.ndarray:
    """Coefficients of rows ``start .. start+size-1`` for a panel seeded by ``seed``."""
    if isinstance(law, Degenerate):
        return np.full(size, float(law.a0))
    out = np.empty(size)
    _backend.kernels().beta_sqrt(_base_key(seed), start, float(law.alpha),
                                 float(law.beta), A_CAP, out)
    return out


def sample_coefficient(law: MixingLaw, seed: int, index: int = 0) -> float:
    """One coefficient draw; ``index`` selects an independent position of the stream."""
    return float(sample_coefficients(law, 1, seed, start=index)[0])


def psi_at_one(law: MixingLaw) -> float:
    """``psi(1) = 2**beta / B(alpha, beta)`` for ``BetaSquared``."""
    if isinstance(law, Degenerate):
        raise DegenerateHasNoTail("a point mass has no unit-root tail")
    return law.psi1


def stationary_initial(a, innovation: InnovationLaw = Gaussian(), seed: int = 0,
                       tol: float = MA_TOL, rows=None, max_terms: int = MA_MAX_TERMS):
    """Draws of ``X(0)`` from the stationary law given the coefficient(s) ``a``.

    Gaussian innovations give the exact ``N(0, 1/(1-a^2))`` draw.  Other laws
    use the moving-average sum truncated once ``a**(m+1)/sqrt(1-a^2) < tol``.
    If that needs more than ``max_terms`` terms, the remainder ``a**M X(-M)``
    is drawn as a Gaussian with its exact variance.
    """
    scalar = np.ndim(a) == 0
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if np.any((a < 0) | (a >= 1)):
        raise InvalidParameter("coefficients must lie in [0, 1)")
    out = np.empty_like(a)
    row0 = 0 if rows is None else int(rows)
    _backend.kernels().stationary_starts(_base_key(seed), row0, a, innovation.kind,
                                         innovation.nu, innovation.tscale, tol,
                                         max_terms, out)
    return float(out[0]) if scalar else out


def ma_terms(a: float, tol: float = MA_TOL) -> int:
    """Number of moving-average terms used for a stationary start."""
    if a == 0.0:
        return 1
    m = math.ceil(math.log(tol * math.sqrt(1 - a * a)) / math.log(a)) - 1
    return max(m, 0) + 1


@dataclass(frozen=True)
class Panel:
    """An ``N x n`` panel with its coefficients and generation metadata."""

    values: np.ndarray
    coefficients: np.ndarray
    seed: int | None
    mixing: MixingLaw | None
    innovation: InnovationLaw | None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.size == 0:
            raise InvalidParameter("panel values must be a non-empty 2-D array")
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (v.shape[0],):
            raise InvalidParameter("need one coefficient per row")
        v.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "coefficients", c)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_array(cls, values, coefficients=None) -> "Panel":
        values = np.asarray(values, dtype=float)
        if coefficients is None:
            coefficients = np.zeros(values.shape[0])
        return cls(values, coefficients, None, None, None)


def simulate_panel(N: int, n: int, mixing: MixingLaw, innovation: InnovationLaw = Gaussian(),
                   seed: int = 0, threads: int | None = 1, tol: float = MA_TOL) -> Panel:
    """Simulate a stationary panel; the result depends only on ``(seed, N, n, laws)``."""
    if N < 1 or n < 1:
        raise InvalidParameter("N and n must be positive")
    a = sample_coefficients(mixing, N, seed)
    values = np.empty((N, n))
    base = _base_key(seed)
    kern = _backend.kernels()

    def work(lo, hi):
        kern.simulate_rows(base, lo, a[lo:hi], values[lo:hi], innovation.kind,
                           innovation.nu, innovation.tscale, tol, MA_MAX_TERMS)

    _parallel.run_ranges(work, N, threads)
    return Panel(values, a, int(seed), mixing, innovation, {"tol": tol})


# ---------------------------------------------------------------------------
# Exact model quantities


def mixing_expectation(mixing: MixingLaw, g: Callable[[float, float], float],
                       epsabs: float = 1e-10, epsrel: float = 1e-10) -> float:
    """``E g(a, 1 - a**2)`` over the mixing law.

    ``g`` receives ``1 - a**2`` separately so that unit-root singularities are
    evaluated without cancellation.  For ``BetaSquared`` the upper part of the
    range uses ``u = 1 - exp(-v)``.
    """
    if isinstance(mixing, Degenerate):
        a = mixing.a0
        return float(g(a, 1.0 - a * a))
    al, be = mixing.alpha, mixing.beta
    lb = special.betaln(al, be)

    def lower(u):
        return g(math.sqrt(u), 1.0 - u) * (1.0 - u) ** (be - 1) / math.exp(lb)

    def upper(v):
        w = math.exp(-v)
        if w == 0.0:
            return 0.0
        u = -math.expm1(-v)
        return g(math.sqrt(u), w) * math.exp((al - 1) * math.log(u) - be * v - lb)

    kw = dict(epsabs=epsabs, epsrel=epsrel, limit=400)
    lo, _ = integrate.quad(lower, 0.0, 0.5, weight="alg", wvar=(al - 1, 0.0), **kw)
    hi, _ = integrate.quad(upper, math.log(2.0), 200.0, **kw)
    return lo + hi


def true_gamma(t: int, mixing: MixingLaw) -> float:
    """``gamma(t) = E a^|t| / (1 - a^2)``; finite only when ``beta > 1``."""
    t = abs(int(t))
    if isinstance(mixing, BetaSquared) and mixing.beta <= 1:
        raise InfiniteCovariance("gamma(t) is infinite for beta <= 1")
    return mixing_expectation(mixing, lambda a, w: a**t / w)


def gamma_asymptote(t: float, beta: float, psi1: float) -> float:
    """Large-lag approximation ``(psi1/2) Gamma(beta-1) t^{-(beta-1)}``."""
    if beta <= 1:
        raise InvalidBeta("the covariance asymptote needs beta > 1")
    return 0.5 * psi1 * math.gamma(beta - 1) * t ** (-(beta - 1))


# ---------------------------------------------------------------------------
# CSV interchange


def _sidecar(panel: Panel) -> dict:
    from . import __version__

    return {
        "version": __version__,
        "N": panel.n_rows,
        "n": panel.n_cols,
        "seed": panel.seed,
        "mixing": panel.mixing.to_dict() if panel.mixing is not None else None,
        "innovation": panel.innovation.to_dict() if panel.innovation is not None else None,
        "coefficients": [float(x) for x in panel.coefficients],
    }


def write_panel_csv(panel: Panel, path) -> tuple[Path, Path]:
    """Write ``row,col,value`` CSV plus a JSON sidecar; floats round-trip exactly."""
    path = Path(path)
    if path.suffix != ".csv":
        path = path.with_name(path.name + ".csv")
    N, n = panel.values.shape
    rows = np.repeat(np.arange(N), n)
    cols = np.tile(np.arange(n), N)
    with open(path, "w") as fh:
        fh.write("row,col,value\n")
        for r, c, v in zip(rows, cols, panel.values.ravel()):
            fh.write(f"{r},{c},{float(v)!r}\n")
    side = path.with_suffix(".json")
    side.write_text(json.dumps(_sidecar(panel), indent=2))
    return path, side


def read_panel_csv(path) -> Panel:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    rows = data[:, 0].astype(int)
    cols = data[:, 1].astype(int)
    values = np.zeros((rows.max() + 1, cols.max() + 1))
    values[rows, cols] = data[:, 2]
    side = path.with_suffix(".json")
    if side.exists():
        meta = json.loads(side.read_text())
        coef = np.asarray(meta.get("coefficients") or np.zeros(values.shape[0]), dtype=float)
        mixing = law_from_dict(meta["mixing"]) if meta.get("mixing") else None
        innov = law_from_dict(meta["innovation"]) if meta.get("innovation") else None
        return Panel(values, coef, meta.get("seed"), mixing, innov)
    return Panel.from_array(values)
