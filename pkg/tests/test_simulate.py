import math

import numpy as np
import pytest
from scipy import stats

from fidudeconv import simulate
from fidudeconv.obsmodel import Dataset
from fidudeconv.rng import make_rng
from fidudeconv.simulate import (
    AtomPrior,
    BetaMixturePrior,
    BetaPrior,
    ReplicateResult,
    ScenarioConfig,
    TruncatedExpPrior,
    aggregate_metrics,
    bootstrap_estimate,
    generate_dataset,
    load_scenario_config,
    run_replication,
    run_simulation,
    scenario,
)

SMALL = dict(replications=4, n_mcmc=100, n_burn=20, bootstrap_samples=50)


def test_truncated_exponential_quantile():
    assert TruncatedExpPrior(8.0, 1.0).quantile(0.5) == pytest.approx(0.08660, abs=5e-6)


def test_beta_one_one_is_uniform():
    draws = BetaPrior(1.0, 1.0).sample(make_rng(0), 20_000)
    assert stats.kstest(draws, "uniform").pvalue > 1e-3


def test_symmetric_mixture_mean():
    draws = BetaMixturePrior(((0.5, 60, 10), (0.5, 10, 60))).sample(make_rng(1), 100_000)
    assert abs(draws.mean() - 0.5) <= 3 * draws.std() / math.sqrt(draws.size)


def test_prior_cdfs():
    assert BetaPrior(5, 5).cdf(0.5) == pytest.approx(0.5)
    tex = TruncatedExpPrior(8.0, 1.0)
    assert tex.cdf(0.5) == pytest.approx((1 - math.exp(-4)) / (1 - math.exp(-8)))
    assert tex.cdf(1.0) == pytest.approx(1.0) and tex.cdf(0.0) == 0.0
    assert AtomPrior(((0.3, 0.4), (0.6, 0.6))).cdf(np.array([0.2, 0.3, 0.7])).tolist() == [0.0, 0.4, 1.0]
    with pytest.raises(ValueError):
        BetaMixturePrior(((0.5, 1, 1), (0.4, 2, 2)))


def test_prior_cdf_matches_sampling():
    for prior in (BetaMixturePrior(((0.5, 10, 30), (0.5, 30, 10))), TruncatedExpPrior(8.0, 1.0)):
        draws = prior.sample(make_rng(2), 20_000)
        assert stats.kstest(draws, prior.cdf).pvalue > 1e-3


def test_generate_dataset_scenarios():
    data, thetas = generate_dataset(scenario(1), make_rng(0))
    assert data.n == 50 and np.all(data.m == 20) and thetas.shape == (50,)
    data3, _ = generate_dataset(scenario(3), make_rng(0))
    assert data3.n == 100 and data3.m.min() >= 100 and data3.m.max() <= 200
    zero = ScenarioConfig(prior=AtomPrior(((0.0, 1.0),)), n=30, m_spec=10)
    assert np.all(generate_dataset(zero, make_rng(0))[0].x == 0)


def test_generate_dataset_m_range_is_uniform():
    cfg = ScenarioConfig(n=20_000, m_spec=(100, 200))
    data, _ = generate_dataset(cfg, make_rng(4))
    counts = np.bincount(data.m - 100, minlength=101)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_bootstrap_examples():
    grid = np.array([0.25, 0.5, 0.75])
    data = Dataset.binomial([1, 2], [2, 4])
    est = bootstrap_estimate(data, 200, 0.05, make_rng(0), grid)
    assert est.at(0.5)[0] == 1.0 and est.kind == "bootstrap"
    one = bootstrap_estimate(Dataset.binomial([1, 3, 4], [5, 5, 5]), 1, 0.05, make_rng(1), grid)
    assert np.array_equal(one.ci_lower, one.ci_upper)


def test_bootstrap_poisson_uses_counts():
    est = bootstrap_estimate(Dataset.poisson([0, 2, 5]), 100, 0.05, make_rng(0), np.array([1.0, 3.0, 6.0]))
    assert est.point.tolist() == pytest.approx([1 / 3, 2 / 3, 1.0])


def test_run_replication_deterministic_and_truth():
    cfg = scenario(1, **SMALL)
    a, b = run_replication(cfg, 3), run_replication(cfg, 3)
    assert a.ok and a.truth[cfg.eval_points.index(0.5)] == pytest.approx(0.5)
    for method in simulate.METHODS:
        assert np.array_equal(a.point[method], b.point[method])
        assert np.array_equal(a.lower[method], b.lower[method])
    c = run_replication(cfg, 4)
    assert not np.array_equal(a.point["bootstrap"], c.point["bootstrap"])


def test_scenario5_truth():
    res = run_replication(scenario(5, **{**SMALL, "n": 20}), 0)
    assert res.truth[2] == pytest.approx(0.98201, abs=5e-6)


def test_poisson_replication():
    cfg = ScenarioConfig(prior=BetaPrior(2, 2), n=15, model="poisson", eval_points=(0.25, 0.5), **SMALL)
    res = run_replication(cfg, 0)
    assert res.ok


def _result(index, truth, point, lo, hi):
    r = ReplicateResult(index, True, np.array([truth]))
    for m in simulate.METHODS:
        r.point[m], r.lower[m], r.upper[m] = np.array([point]), np.array([lo]), np.array([hi])
    return r


def test_aggregate_examples():
    rep = aggregate_metrics([_result(0, 0.5, 0.4, 0.1, 0.6), _result(1, 0.5, 0.6, 0.2, 0.4)], (0.5,))
    row = rep.row("fiducial_mixture", 0.5)
    assert row["mse"] == pytest.approx(0.01)
    assert row["coverage"] == 0.5 and row["covered"] == 1
    assert row["mean_length"] == pytest.approx(0.35)
    assert row["coverage_se"] == pytest.approx(math.sqrt(0.25 / 2))


def test_aggregate_single_replicate_has_no_se():
    row = aggregate_metrics([_result(0, 0.5, 0.4, 0.1, 0.6)], (0.5,)).row("bootstrap", 0.5)
    assert row["mse_se"] is None and row["coverage_se"] is None and row["mean_length_se"] is None


def test_aggregate_order_independent_and_coverage_exact():
    rng = make_rng(0)
    results = [_result(k, 0.5, *sorted(rng.random(3))) for k in range(30)]
    a = aggregate_metrics(results, (0.5,))
    b = aggregate_metrics(results[::-1], (0.5,))
    assert a.rows == b.rows
    for row in a.rows:
        assert row["coverage"] == row["covered"] / row["n_completed"]
        assert 0 <= row["coverage"] <= 1 and row["mse"] >= 0


def test_failed_replicates_are_counted(monkeypatch):
    cfg = scenario(1, **SMALL)
    real = simulate.run_chain

    def flaky(data, gcfg):
        if gcfg.seed % 2 == 0:
            raise RuntimeError("boom")
        return real(data, gcfg)

    monkeypatch.setattr(simulate, "run_chain", flaky)
    results = [run_replication(cfg, k) for k in range(6)]
    failed = [r for r in results if not r.ok]
    assert failed and all("boom" in r.error for r in failed)
    if len(failed) < len(results):
        rep = aggregate_metrics(results, cfg.eval_points, n_requested=6)
        assert rep.n_failed == len(failed) and rep.n_completed == 6 - len(failed)
        assert rep.rows[0]["n_failed"] == len(failed)


def test_run_simulation_independent_of_jobs(tmp_path):
    cfg = scenario(1, **SMALL)
    one = run_simulation(cfg, jobs=1)
    two = run_simulation(cfg, jobs=2)
    one.to_csv(tmp_path / "a.csv")
    two.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    summary = one.summary()
    assert summary["metadata"]["bootstrap_interval"] == "percentile"
    assert "g_modeling" in summary["absent_methods"]


def test_load_scenario_config(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(
        "scenario: custom\nprior: {type: beta_mixture, components: [[0.5, 10, 30], [0.5, 30, 10]]}\n"
        "n: 40\nm: [5, 9]\nreplications: 3\nseed: 17\nmcmc: {n_mcmc: 120, burn_in: 30}\n"
    )
    cfg = load_scenario_config(path)
    assert cfg.n == 40 and cfg.m_spec == (5, 9) and cfg.n_mcmc == 120 and cfg.n_burn == 30 and cfg.seed == 17
    assert isinstance(cfg.prior, BetaMixturePrior)
    js = tmp_path / "c.json"
    js.write_text('{"scenario": 2, "replications": 5}')
    cfg2 = load_scenario_config(js)
    assert cfg2.id == 2 and cfg2.replications == 5 and cfg2.n == 50
    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario: 1\nbogus: 3\n")
    with pytest.raises(ValueError):
        load_scenario_config(bad)


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(m_spec=0)
    with pytest.raises(ValueError):
        ScenarioConfig(replications=0)
    with pytest.raises(ValueError):
        scenario(9)
