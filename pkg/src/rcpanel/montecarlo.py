"""Replication engine, density estimates, KS distances and coverage studies.

Replication ``r`` of an experiment seeded by ``seed`` simulates its panel with
seed ``derive_key(seed, r)``; replications run in parallel and are collected
in index order, so results do not depend on the thread count.
"""

from __future__ import annotations

import configparser
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import _parallel, _rng, estimators, limit_laws, stable_dist
from .errors import InvalidParameter, TooFewSamples
from .panel_model import (
    BetaSquared,
    Degenerate,
    Gaussian,
    InnovationLaw,
    MixingLaw,
    Rademacher,
    StudentT,
    true_gamma,
)

__all__ = [
    "Normalization",
    "ExperimentSpec",
    "ExperimentResult",
    "CoverageReport",
    "replication_seed",
    "resolve_normalization",
    "reference_functions",
    "run",
    "kde",
    "silverman_bandwidth",
    "ks_distance",
    "coverage_study",
    "figure1_spec",
    "figure1",
    "parse_mixing",
    "parse_innovation",
    "spec_from_config",
    "write_experiment",
    "json_safe",
]

STATISTICS = ("SampleMean", "SampleCov", "PartialSum")
KDE_POINTS = 512
KDE_PAD = 4.0  # grid padding in bandwidths beyond the sample quantiles
BW_FLOOR = 1e-6


@dataclass(frozen=True)
class Normalization:
    """Statistic is mapped to ``N^p_N n^p_n (stat - centering)``.

    With ``log_beta`` set the factor is divided by
    ``log(N^{1/(2 log_beta)} / n)^{1/(2 log_beta)}``.
    """

    p_N: float
    p_n: float
    centering: str = "None"  # None, TrueGamma or TrueGammaIfBetaGt1
    log_beta: float | None = None

    def factor(self, N: int, n: int) -> float:
        s = float(N) ** self.p_N * float(n) ** self.p_n
        if self.log_beta is not None:
            b = self.log_beta
            lam = N ** (1.0 / (2 * b)) / n
            if lam <= 1.0:
                raise InvalidParameter("log normalization needs N^{1/(2 beta)} > n")
            s /= math.log(lam) ** (1.0 / (2 * b))
        return s


@dataclass(frozen=True)
class ExperimentSpec:
    """One Monte Carlo experiment.

    Sizes are either ``N`` and ``n`` or ``n`` with a growth rule
    ``N = floor(c n^rho)``.  ``normalization=None`` takes it from the regime
    classifier; ``reference`` is ``"auto"`` (the classified limit law),
    ``"none"``, or a limit-law object.
    """

    statistic: str = "SampleCov"
    mixing: MixingLaw = field(default_factory=lambda: BetaSquared(2.0, 2.5))
    innovation: InnovationLaw = field(default_factory=Gaussian)
    n: int = 100
    N: int | None = None
    rho: float | None = None
    c: float = 1.0
    t: int = 0
    s: int = 0
    tau: float = 1.0
    reps: int = 100
    seed: int = 0
    normalization: Normalization | None = None
    reference: object = "auto"
    threads: int | None = 1

    def __post_init__(self):
        if self.statistic not in STATISTICS:
            raise InvalidParameter(f"statistic must be one of {STATISTICS}")
        if self.reps < 1:
            raise InvalidParameter("reps must be >= 1")
        if self.n < 1 or (self.N is None and self.rho is None):
            raise InvalidParameter("give n with either N or rho")
        if self.N is not None and self.N < 1:
            raise InvalidParameter("N must be positive")

    @property
    def sizes(self) -> tuple[int, int]:
        if self.N is not None:
            return int(self.N), int(self.n)
        return max(1, int(math.floor(self.c * self.n**self.rho))), int(self.n)

    @property
    def growth(self) -> limit_laws.GrowthRule:
        if self.rho is not None:
            return limit_laws.GrowthRule(self.rho, self.c)
        N, n = self.sizes
        return limit_laws.GrowthRule(math.log(N) / math.log(n) if n > 1 else 1.0)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("statistic", "n", "N", "rho", "c", "t", "s", "tau",
                                           "reps", "seed", "threads")}
        d["mixing"] = self.mixing.to_dict()
        d["innovation"] = self.innovation.to_dict()
        d["sizes"] = list(self.sizes)
        d["normalization"] = None if self.normalization is None else asdict(self.normalization)
        ref = self.reference
        d["reference"] = ref if isinstance(ref, str) else asdict(ref)
        return d


@dataclass
class ExperimentResult:
    samples: np.ndarray
    grid: np.ndarray
    density: np.ndarray
    reference_density: np.ndarray | None
    ks: float | None
    moments: dict
    runtime: float
    seed: int
    case: dict | None
    normalization: Normalization
    spec: ExperimentSpec

    def summary(self) -> dict:
        return {
            "ks": self.ks,
            "moments": self.moments,
            "runtime": self.runtime,
            "seed": self.seed,
            "case": self.case,
            "normalization": asdict(self.normalization),
            "spec": self.spec.to_dict(),
        }


@dataclass(frozen=True)
class CoverageReport:
    level: float
    empirical_coverage: float
    R: int
    mode: str
    average_width: float


def replication_seed(seed: int, r: int) -> int:
    return _rng.derive_key(seed, r)


def _stat_kind(spec: ExperimentSpec) -> str:
    if spec.statistic == "SampleMean":
        return "Mean"
    return "CrossCov" if spec.s != 0 else "TemporalCov"


def _classify(spec: ExperimentSpec):
    beta = spec.mixing.tail_beta
    return limit_laws.classify(_stat_kind(spec), beta, spec.growth, mixing=spec.mixing, t=spec.t)


def resolve_normalization(spec: ExperimentSpec):
    """``(Normalization, RegimeCase or None)`` for ``spec``."""
    if spec.normalization is not None:
        case = None
        try:
            case = _classify(spec)
        except Exception:  # classification is informative only here
            case = None
        return spec.normalization, case
    if spec.statistic == "PartialSum":
        raise InvalidParameter("partial sums need an explicit normalization")
    case = _classify(spec)
    return Normalization(case.p_N, case.p_n, case.centering.value,
                         case.beta if case.log_factor else None), case


def reference_functions(limit):
    """``(cdf, pdf)`` callables for a limit law, or ``None`` if it has no closed form."""
    if limit is None:
        return None
    kind = getattr(limit, "kind", None)
    if kind == "Gaussian":
        if limit.variance is None or not limit.variance > 0:
            return None
        d = stats.norm(0.0, math.sqrt(limit.variance))
        return d.cdf, d.pdf
    if kind in ("SymmetricStable", "AsymmetricStable", "NegSquaredSymmetricStable"):
        if limit.c is None:
            return None
        law = stable_dist.from_paper_law(limit)
        return (lambda x: stable_dist.cdf_transformed(law, x),
                lambda x: stable_dist.pdf_transformed(law, x))
    return None


def _centering_value(spec: ExperimentSpec, centering: str) -> float:
    if spec.statistic != "SampleCov" or centering == "None":
        return 0.0
    beta = spec.mixing.tail_beta
    if centering == "TrueGammaIfBetaGt1" and beta < 1:
        return 0.0
    return true_gamma(spec.t, spec.mixing)


def _one_replication(spec: ExperimentSpec, r: int) -> float:
    N, n = spec.sizes
    seed = replication_seed(spec.seed, r)
    if spec.statistic == "SampleMean":
        sm = estimators.simulate_summary(N, n, spec.mixing, spec.innovation, seed, lags=(),
                                         threads=1)
        return estimators.sample_mean(sm)
    if spec.statistic == "SampleCov":
        sm = estimators.simulate_summary(N, n, spec.mixing, spec.innovation, seed,
                                         lags=((spec.t, spec.s),), threads=1)
        return estimators.sample_cov(sm, (spec.t, spec.s))
    n_cols = n + max(spec.t, 0)
    cut = int(math.floor(n * spec.tau + 1e-12))
    sm = estimators.simulate_summary(N, n_cols, spec.mixing, spec.innovation, seed,
                                     lags=((spec.t, spec.s),), cuts=(cut,), threads=1)
    return estimators.partial_sum_process(sm, (spec.t, spec.s), [spec.tau], n=n)[0]


def run(spec: ExperimentSpec) -> ExperimentResult:
    """Simulate ``spec.reps`` normalized statistics and compare them with the reference law."""
    t0 = time.perf_counter()
    norm, case = resolve_normalization(spec)
    N, n = spec.sizes
    raw = np.array(_parallel.map_ordered(lambda r: _one_replication(spec, r), spec.reps,
                                         spec.threads))
    center = _centering_value(spec, norm.centering)
    samples = norm.factor(N, n) * (raw - center)

    if isinstance(spec.reference, str):
        limit = case.limit if (spec.reference == "auto" and case is not None) else None
    else:
        limit = spec.reference
    ref = reference_functions(limit)
    if samples.size >= 10:
        grid, dens = kde(samples)
    else:
        grid, dens = np.array([]), np.array([])
    ks = ref_dens = None
    if ref is not None:
        ks = ks_distance(samples, ref[0])
        ref_dens = np.asarray(ref[1](grid), dtype=float) if grid.size else np.array([])
    return ExperimentResult(samples, grid, dens, ref_dens, ks, _moments(samples),
                            time.perf_counter() - t0, spec.seed,
                            None if case is None else case.to_dict(), norm, spec)


def _moments(x: np.ndarray) -> dict:
    out = {"mean": float(np.mean(x)), "var": float(np.var(x, ddof=1)) if x.size > 1 else 0.0}
    out["skew"] = float(stats.skew(x)) if x.size > 2 and np.ptp(x) > 0 else 0.0
    return out


def silverman_bandwidth(samples) -> float:
    """``1.06 min(sd, IQR/1.34) R^{-1/5}``, floored at ``1e-6``."""
    x = np.asarray(samples, dtype=float)
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = sd
    return max(1.06 * spread * x.size ** (-0.2), BW_FLOOR)


def kde(samples, grid=None, bandwidth: float | None = None):
    """Gaussian kernel density estimate; returns ``(grid, density)``.

    The default grid has 512 points spanning the 0.001 and 0.999 sample
    quantiles padded by four bandwidths on each side.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 10:
        raise TooFewSamples("kde needs at least 10 samples")
    bw = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if grid is None:
        lo, hi = np.quantile(x, [0.001, 0.999])
        grid = np.linspace(lo - KDE_PAD * bw, hi + KDE_PAD * bw, KDE_POINTS)
    grid = np.asarray(grid, dtype=float)
    dens = np.zeros(grid.shape)
    for chunk in np.array_split(x, max(1, x.size // 2048)):
        z = (grid[:, None] - chunk[None, :]) / bw
        dens += np.exp(-0.5 * z * z).sum(axis=1)
    dens /= x.size * bw * math.sqrt(2 * math.pi)
    return grid, dens


def ks_distance(samples, cdf) -> float:
    """``sup |ECDF - F|`` over the sorted samples, both one-sided gaps."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size < 1:
        raise TooFewSamples("ks_distance needs at least one sample")
    F = np.asarray(cdf(x), dtype=float)
    n = x.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def coverage_study(spec: ExperimentSpec, level: float = 0.9, mode: str = "Gaussian",
                   R: int | None = None, beta: float | None = None, psi: float | None = None,
                   u0: float = 0.1) -> CoverageReport:
    """Share of replications whose interval for ``gamma(t)`` covers the true value."""
    R = spec.reps if R is None else int(R)
    N, n = spec.sizes
    truth = true_gamma(spec.t, spec.mixing)
    lags = tuple(dict.fromkeys([(spec.t, 0), (0, 0), (1, 0)]))

    def one(r):
        sm = estimators.simulate_summary(N, n, spec.mixing, spec.innovation,
                                         replication_seed(spec.seed, r), lags=lags, threads=1)
        ci = estimators.confidence_interval_gamma(sm, spec.t, level, mode, beta, psi, u0)
        return ci.contains(truth), ci.width

    res = _parallel.map_ordered(one, R, spec.threads)
    hits = np.array([h for h, _ in res], dtype=float)
    widths = np.array([w for _, w in res])
    return CoverageReport(level, float(hits.mean()), R, mode, float(widths.mean()))


# ---------------------------------------------------------------------------
# Figure 1


def figure1_spec(beta: float = 2.5, N: int = 2000, n: int = 500, reps: int = 500,
                 seed: int = 7, alpha: float = 2.0, threads: int | None = 1) -> ExperimentSpec:
    """Lag-zero autocovariance experiment with ``a^2 ~ Beta(alpha, beta)``.

    ``beta > 2``: ``sqrt(N)(gamma_hat - gamma)``; ``1 < beta < 2``:
    ``N^{1-1/beta}(gamma_hat - gamma)`` compared with ``V*`` when
    ``N^{1/beta} > n`` and with ``V+`` otherwise.
    """
    return ExperimentSpec("SampleCov", BetaSquared(alpha, beta), Gaussian(), n=n, N=N, reps=reps,
                          seed=seed, threads=threads)


def figure1(beta: float = 2.5, N: int = 2000, n: int = 500, reps: int = 500, seed: int = 7,
            alpha: float = 2.0, threads: int | None = 1) -> ExperimentResult:
    return run(figure1_spec(beta, N, n, reps, seed, alpha, threads))


# ---------------------------------------------------------------------------
# Config files and outputs


def parse_mixing(text: str) -> MixingLaw:
    """``beta2:ALPHA,BETA`` or ``degenerate:A0``."""
    kind, _, args = text.strip().partition(":")
    vals = [float(v) for v in args.split(",") if v.strip()]
    kind = kind.lower()
    if kind in ("beta2", "betasquared") and len(vals) == 2:
        return BetaSquared(*vals)
    if kind == "degenerate" and len(vals) == 1:
        return Degenerate(vals[0])
    raise InvalidParameter(f"cannot parse mixing law {text!r}")


def parse_innovation(text: str) -> InnovationLaw:
    """``gaussian``, ``student:NU`` or ``rademacher``."""
    kind, _, args = text.strip().partition(":")
    kind = kind.lower()
    if kind == "gaussian":
        return Gaussian()
    if kind in ("student", "studentt", "t"):
        return StudentT(float(args))
    if kind == "rademacher":
        return Rademacher()
    raise InvalidParameter(f"cannot parse innovation law {text!r}")


_STAT_ALIASES = {"mean": "SampleMean", "samplemean": "SampleMean", "cov": "SampleCov",
                 "samplecov": "SampleCov", "partial": "PartialSum", "partialsum": "PartialSum"}


def spec_from_config(path, section: str = "experiment", overrides: dict | None = None):
    """Read an INI-style experiment file; returns ``(ExperimentSpec, outputs dict)``.

    Keys of the ``[experiment]`` section: ``statistic`` (mean, cov, partial),
    ``mixing``, ``innovation``, ``n``, ``N`` or ``rho`` (with optional ``c``),
    ``t``, ``s``, ``tau``, ``reps``, ``seed``, ``threads``, ``reference``
    (auto or none), ``normalization`` (classify or ``p_N,p_n``) and
    ``centering``.  An optional ``[output]`` section names ``prefix``.
    """
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise InvalidParameter(f"cannot read config file {path}")
    if section not in cp:
        raise InvalidParameter(f"config file lacks a [{section}] section")
    sec = dict(cp[section])
    sec.update({k: str(v) for k, v in (overrides or {}).items() if v is not None})
    known = {"statistic", "mixing", "innovation", "n", "n_rows", "rho", "c", "t", "s", "tau",
             "reps", "seed", "threads", "reference", "normalization", "centering"}
    unknown = set(sec) - known
    if unknown:
        raise InvalidParameter(f"unknown config keys: {sorted(unknown)}")
    stat = _STAT_ALIASES.get(sec.get("statistic", "cov").lower())
    if stat is None:
        raise InvalidParameter(f"unknown statistic {sec.get('statistic')!r}")
    norm = None
    ntext = sec.get("normalization", "classify").strip().lower()
    if ntext != "classify":
        p = [float(v) for v in ntext.split(",")]
        if len(p) != 2:
            raise InvalidParameter("normalization must be 'classify' or 'p_N,p_n'")
        norm = Normalization(p[0], p[1], sec.get("centering", "None"))
    # configparser lowercases keys, so the row count is spelled n_rows
    N = int(sec["n_rows"]) if "n_rows" in sec else None
    spec = ExperimentSpec(
        statistic=stat,
        mixing=parse_mixing(sec.get("mixing", "beta2:2,2.5")),
        innovation=parse_innovation(sec.get("innovation", "gaussian")),
        n=int(sec.get("n", 100)), N=N,
        rho=float(sec["rho"]) if "rho" in sec else None, c=float(sec.get("c", 1.0)),
        t=int(sec.get("t", 0)), s=int(sec.get("s", 0)), tau=float(sec.get("tau", 1.0)),
        reps=int(sec.get("reps", 100)), seed=int(sec.get("seed", 0)),
        normalization=norm, reference=sec.get("reference", "auto").strip().lower(),
        threads=int(sec.get("threads", 1)),
    )
    outputs = dict(cp["output"]) if "output" in cp else {}
    return spec, outputs


KDE_HEADER = ("grid", "density", "reference_density")
FIGURE1_HEADER = ("x", "kde", "limit_density")


def write_experiment(result: ExperimentResult, prefix, extra: dict | None = None,
                     header: tuple[str, str, str] = KDE_HEADER) -> dict:
    """Write ``samples.csv``, ``kde.csv`` and ``summary.json`` under directory ``prefix``."""
    import json

    from . import __version__

    out = Path(prefix)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"samples": out / "samples.csv", "kde": out / "kde.csv", "summary": out / "summary.json"}
    np.savetxt(paths["samples"], result.samples, fmt="%.17g")
    ref = result.reference_density
    with open(paths["kde"], "w") as fh:
        fh.write(",".join(header) + "\n")
        for i, x in enumerate(result.grid):
            r = "" if ref is None else repr(float(ref[i]))
            fh.write(f"{float(x)!r},{float(result.density[i])!r},{r}\n")
    summary = result.summary()
    summary["version"] = __version__
    if extra:
        summary.update(extra)
    paths["summary"].write_text(json.dumps(json_safe(summary), indent=2, default=_json_default))
    return paths


def json_safe(obj):
    """Copy of ``obj`` with non-finite floats spelled ``"inf"``, ``"-inf"`` or ``"nan"``."""
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return json_safe(obj.tolist())
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return str(float(obj))
    return obj


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")
