import numpy as np
import pytest

from fidudeconv.gibbs import FiducialSamples, GibbsConfig, run_chain
from fidudeconv.inference import (
    SampleSizeError,
    ci_conservative,
    ci_mixture,
    estimate_cdf,
    min_draws,
    nearest_rank,
    pointwise_median,
)
from fidudeconv.obsmodel import Dataset
from fidudeconv.rng import make_rng


def _samples(lower, upper):
    lower = np.asarray(lower, float).reshape(len(lower), -1)
    upper = np.asarray(upper, float).reshape(len(upper), -1)
    return FiducialSamples(np.linspace(0.1, 0.9, lower.shape[1]), lower, upper)


def test_pointwise_median_examples():
    assert pointwise_median(_samples([0.2, 0.4], [0.6, 0.8]))[0] == pytest.approx(0.5)
    assert pointwise_median(_samples([0.3] * 7, [0.3] * 7))[0] == 0.3
    assert pointwise_median(_samples([0.3], [0.7]))[0] == pytest.approx(0.5)


def test_nearest_rank_convention():
    values = np.arange(1, 2001, dtype=float)
    assert nearest_rank(values, 0.025) == 50.0
    assert nearest_rank(values, 0.975) == 1950.0
    assert nearest_rank(np.arange(1, 11) / 10, 0.9) == 0.9


def test_ci_conservative_uses_fiftieth_order_statistic():
    rng = make_rng(0)
    lower = rng.random(2000)
    upper = lower + 0.1
    lo, hi = ci_conservative(_samples(lower, upper), 0.05)
    assert lo[0] == np.sort(lower)[49]
    assert hi[0] == np.sort(upper)[1949]


def test_degenerate_intervals():
    s = _samples([0.4] * 40, [0.4] * 40)
    assert ci_conservative(s)[0][0] == ci_conservative(s)[1][0] == 0.4
    assert ci_mixture(s)[0][0] == ci_mixture(s)[1][0] == 0.4


def test_ci_mixture_pooled_example():
    values = np.arange(1, 11) / 10
    s = _samples(values[:5], values[5:])
    lo, hi = ci_mixture(s, alpha=0.2)
    assert (lo[0], hi[0]) == (0.1, 0.9)


def test_sample_size_guard():
    assert min_draws(0.05) == 40
    with pytest.raises(SampleSizeError):
        ci_conservative(_samples([0.1] * 39, [0.2] * 39), 0.05)
    with pytest.raises(ValueError):
        ci_mixture(_samples([0.1] * 50, [0.2] * 50), 1.5)


def test_nesting_and_point_inside_on_chain_output():
    rng = make_rng(3)
    data = Dataset.binomial(rng.binomial(20, rng.beta(5, 5, 50)), 20)
    fs = run_chain(data, GibbsConfig(n_mcmc=400, n_burn=100, seed=1))
    mix = estimate_cdf(fs, 0.05, "mixture")
    con = estimate_cdf(fs, 0.05, "conservative")
    assert np.all(con.ci_lower <= mix.ci_lower) and np.all(mix.ci_upper <= con.ci_upper)
    for est in (mix, con):
        assert np.all(est.ci_lower <= est.point) and np.all(est.point <= est.ci_upper)
        for arr in (est.point, est.ci_lower, est.ci_upper):
            assert np.all(np.diff(arr) >= 0) and np.all((arr >= 0) & (arr <= 1))


def test_quantile_monotone_in_level():
    rng = make_rng(4)
    values = rng.random((300, 7))
    qs = np.linspace(0.01, 0.99, 30)
    out = np.array([nearest_rank(values, q) for q in qs])
    assert np.all(np.diff(out, axis=0) >= 0)


def test_permutation_invariance():
    rng = make_rng(5)
    lower = np.sort(rng.random((100, 9)), axis=1)
    upper = np.minimum(lower + rng.random((100, 9)) * 0.2, 1.0)
    upper = np.maximum.accumulate(upper, axis=1)
    perm = rng.permutation(100)
    a = estimate_cdf(_samples(lower, upper))
    b = estimate_cdf(_samples(lower[perm], upper[perm]))
    assert np.array_equal(a.point, b.point) and np.array_equal(a.ci_lower, b.ci_lower)


def test_estimate_kind_and_lookup():
    s = _samples(np.linspace(0, 0.5, 50), np.linspace(0.5, 1, 50))
    est = estimate_cdf(s, 0.05, "conservative")
    assert est.kind == "conservative" and est.alpha == 0.05
    point, lo, hi = est.at(0.1)
    assert lo <= point <= hi
    with pytest.raises(KeyError):
        est.at(0.123)
    with pytest.raises(ValueError):
        estimate_cdf(s, 0.05, "bogus")
