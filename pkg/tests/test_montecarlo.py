import json
import math

import numpy as np
import pytest
from scipy import stats

from rcpanel import limit_laws as ll
from rcpanel import montecarlo as mc
from rcpanel.errors import InvalidParameter, TooFewSamples
from rcpanel.panel_model import BetaSquared, Degenerate, StudentT


def _trapz(y, x):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


# --- kde and KS ------------------------------------------------------------

def test_kde_normal():
    x = np.random.default_rng(1).standard_normal(10**4)
    grid = np.linspace(-3, 3, 301)
    _, d = mc.kde(x, grid)
    assert np.max(np.abs(d - stats.norm.pdf(grid))) < 0.03
    g, d = mc.kde(x)
    assert np.all(d >= 0)
    assert _trapz(d, g) == pytest.approx(1.0, abs=1e-3)


def test_kde_spike():
    g, d = mc.kde(np.full(50, 2.5))
    assert mc.silverman_bandwidth(np.full(50, 2.5)) == mc.BW_FLOOR
    assert np.all(d >= 0)
    assert _trapz(d, g) == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(TooFewSamples):
        mc.kde(np.arange(9.0))


def test_kde_heavy_tail_integrates():
    x = stats.cauchy.rvs(size=2000, random_state=2)
    g, d = mc.kde(x)
    inside = np.mean((x >= g[0]) & (x <= g[-1]))
    assert _trapz(d, g) == pytest.approx(inside, abs=1e-3)


def test_ks_distance():
    assert mc.ks_distance([0.0], stats.norm.cdf) == pytest.approx(0.5)
    assert mc.ks_distance([-1.0, 1.0], lambda v: np.full(np.shape(v), 0.5)) == pytest.approx(0.5)
    x = np.random.default_rng(3).standard_normal(10**4)
    ks = mc.ks_distance(x, stats.norm.cdf)
    assert ks == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-15)
    assert ks < 1.63 / math.sqrt(x.size)
    with pytest.raises(TooFewSamples):
        mc.ks_distance([], stats.norm.cdf)


# --- experiments -----------------------------------------------------------

def test_normalization_factor():
    nm = mc.Normalization(0.5, 0.25)
    assert nm.factor(400, 16) == pytest.approx(40.0)
    lg = mc.Normalization(1 - 1 / 1.6, 0.0, log_beta=0.8)
    N, n = 10**6, 100
    lam = N ** (1 / 1.6) / n
    assert lg.factor(N, n) == pytest.approx(N ** (1 - 1 / 1.6) / math.log(lam) ** (1 / 1.6))
    with pytest.raises(InvalidParameter):
        lg.factor(100, 100)


def test_spec_validation():
    with pytest.raises(InvalidParameter):
        mc.ExperimentSpec("Median", n=10, N=10)
    with pytest.raises(InvalidParameter):
        mc.ExperimentSpec(n=10)
    with pytest.raises(InvalidParameter):
        mc.run(mc.ExperimentSpec("PartialSum", n=10, N=10, reps=2))
    sp = mc.ExperimentSpec(n=100, rho=1.5, c=2.0)
    assert sp.sizes == (2000, 100)


def test_degenerate_mean_sanity():
    sp = mc.ExperimentSpec("SampleMean", Degenerate(0.5), n=200, N=200, reps=500, seed=1)
    r = mc.run(sp)
    assert r.case["case_id"] == "P3.4-iv"
    assert r.case["limit"]["variance"] == pytest.approx(4.0)
    assert r.ks < 0.08
    assert r.reference_density is not None and r.reference_density.shape == r.grid.shape


def test_centering_and_reference_override():
    law = BetaSquared(2, 2.5)
    sp = mc.ExperimentSpec("SampleCov", law, n=100, N=300, reps=20, seed=2,
                           reference=ll.GaussianLaw(6.2222))
    r = mc.run(sp)
    raw = r.samples / math.sqrt(300) + 7 / 3
    assert r.normalization.centering == "TrueGamma"
    sp2 = mc.ExperimentSpec("SampleCov", law, n=100, N=300, reps=20, seed=2, reference="none",
                            normalization=mc.Normalization(0.0, 0.0))
    np.testing.assert_allclose(mc.run(sp2).samples, raw, rtol=1e-12)
    assert mc.run(sp2).ks is None


def test_determinism_across_threads():
    base = dict(statistic="SampleCov", mixing=BetaSquared(2, 1.5), innovation=StudentT(5.0),
                n=40, N=100, reps=16, seed=11)
    a = mc.run(mc.ExperimentSpec(**base, threads=1)).samples
    b = mc.run(mc.ExperimentSpec(**base, threads=1)).samples
    c = mc.run(mc.ExperimentSpec(**base, threads=8)).samples
    assert np.array_equal(a, b) and np.array_equal(a, c)
    assert mc.replication_seed(11, 3) != mc.replication_seed(11, 4)


def test_partial_sum_experiment():
    sp = mc.ExperimentSpec("PartialSum", BetaSquared(2, 2.5), n=50, N=100, s=1, tau=0.5,
                           reps=5, seed=3, normalization=mc.Normalization(-0.5, -0.5))
    r = mc.run(sp)
    assert r.samples.shape == (5,) and np.all(np.isfinite(r.samples))


def test_coverage_width_monotone():
    sp = mc.ExperimentSpec("SampleCov", BetaSquared(2, 2.5), n=100, N=200, reps=40, seed=4)
    lo = mc.coverage_study(sp, level=0.9)
    hi = mc.coverage_study(sp, level=0.999)
    assert hi.average_width > lo.average_width
    assert 0 <= lo.empirical_coverage <= hi.empirical_coverage <= 1
    assert lo.R == 40 and lo.mode == "Gaussian"


@pytest.mark.slow
@pytest.mark.xfail(strict=False, reason="finite-n variance drift at reduced sizes; see decisions ledger")
def test_intermediate_regime_variance_stable():
    # n^{-2} lambda^{-3/2} S^{0,1}(1) with N = n^{2 beta}; reduced from n in {200, 400}
    beta = 1.25
    norm = mc.Normalization(-3 / (4 * beta), -0.5)
    var = []
    for n, seed in ((40, 1), (80, 2)):
        sp = mc.ExperimentSpec("PartialSum", BetaSquared(2, beta), n=n, rho=2 * beta, s=1,
                               reps=500, seed=seed, normalization=norm, reference="none")
        var.append(mc.run(sp).moments["var"])
    assert np.all(np.isfinite(var))
    assert var[1] / var[0] == pytest.approx(1.0, rel=0.25)


# --- config and outputs ----------------------------------------------------

def test_parse_laws():
    assert mc.parse_mixing("beta2:2,2.5") == BetaSquared(2.0, 2.5)
    assert mc.parse_mixing("degenerate:0.3") == Degenerate(0.3)
    assert mc.parse_innovation("student:5") == StudentT(5.0)
    for bad in ("beta2:2", "gamma:1"):
        with pytest.raises(InvalidParameter):
            mc.parse_mixing(bad)
    with pytest.raises(InvalidParameter):
        mc.parse_innovation("cauchy")


def test_spec_from_config(tmp_path):
    cfg = tmp_path / "e.ini"
    cfg.write_text("[experiment]\nstatistic = mean\nmixing = degenerate:0.5\nn = 20\n"
                   "n_rows = 30\nreps = 12\nseed = 5\nnormalization = 0.5,0.5\n"
                   "[output]\nprefix = out\n")
    spec, out = mc.spec_from_config(cfg, overrides={"reps": 7, "seed": None})
    assert (spec.statistic, spec.sizes, spec.reps, spec.seed) == ("SampleMean", (30, 20), 7, 5)
    assert spec.normalization == mc.Normalization(0.5, 0.5)
    assert out == {"prefix": "out"}
    cfg.write_text("[experiment]\nn = 20\nrho = 2\nbogus = 1\n")
    with pytest.raises(InvalidParameter):
        mc.spec_from_config(cfg)
    with pytest.raises(InvalidParameter):
        mc.spec_from_config(tmp_path / "missing.ini")


def test_write_experiment(tmp_path):
    sp = mc.ExperimentSpec("SampleMean", Degenerate(0.5), n=20, N=20, reps=30, seed=6)
    r = mc.run(sp)
    paths = mc.write_experiment(r, tmp_path / "run")
    assert np.array_equal(np.loadtxt(paths["samples"]), r.samples)
    lines = paths["kde"].read_text().splitlines()
    assert lines[0] == "grid,density,reference_density" and len(lines) == mc.KDE_POINTS + 1
    summary = json.loads(paths["summary"].read_text())
    assert summary["seed"] == 6 and summary["ks"] == pytest.approx(r.ks)
    assert set(summary["moments"]) == {"mean", "var", "skew"}


def test_json_safe():
    out = mc.json_safe({"a": [1.0, math.inf], "b": np.array([-math.inf, math.nan])})
    assert out == {"a": [1.0, "inf"], "b": ["-inf", "nan"]}
    json.dumps(out, allow_nan=False)
