import numpy as np
import pytest

from fidudeconv.gibbs import LatentState, constraint_check
from fidudeconv.obsmodel import Dataset, Observation
from fidudeconv.oracle import (
    DiscretePrior,
    OracleTimeoutError,
    fiducial_membership_prob,
    marginal_pmf,
    rejection_sample,
)
from fidudeconv.rng import make_rng


def test_discrete_prior_validation():
    with pytest.raises(ValueError):
        DiscretePrior(((0.5, 0.6), (0.2, 0.4)))
    with pytest.raises(ValueError):
        DiscretePrior(((0.2, 0.5), (0.5, 0.4)))
    with pytest.raises(ValueError):
        DiscretePrior(((0.2, 1.2), (0.5, -0.2)))
    p = DiscretePrior(((0.2, 0.25), (0.6, 0.75)))
    assert p.cdf(np.array([0.1, 0.2, 0.5, 0.6, 0.9])).tolist() == [0.0, 0.25, 0.25, 1.0, 1.0]


def test_rejection_single_observation_accepts_everything():
    u, w = rejection_sample(Dataset.binomial([1], [3]), 5000, make_rng(0))
    assert u.shape == (5000, 1)
    assert abs(u.mean() - 0.5) < 0.02 and abs(w.mean() - 0.5) < 0.02


def test_rejection_draws_are_feasible():
    data = Dataset.binomial([0, 4], [4, 4])
    u, w = rejection_sample(data, 2000, make_rng(1))
    for k in range(200):
        s = LatentState.from_uw(data, u[k], w[k])
        assert constraint_check(s)
        if s.theta_upper[0] <= s.theta_lower[1]:
            assert w[k, 0] < w[k, 1]


def test_rejection_guards():
    with pytest.raises(ValueError):
        rejection_sample(Dataset.binomial([0] * 6, [2] * 6), 1, make_rng(0))
    with pytest.raises(OracleTimeoutError):
        rejection_sample(Dataset.binomial([0, 0, 1000, 1000], [1000] * 4), 10**6, make_rng(0), min_acceptance=0.9)


@pytest.mark.parametrize(
    "prior, obs, expected",
    [
        (DiscretePrior(((0.5, 1.0),)), Observation(1, 2), 0.5),
        (DiscretePrior(((0.0, 0.5), (1.0, 0.5))), Observation(0, 3), 0.5),
        (DiscretePrior(((0.3, 0.5), (0.7, 0.5))), Observation(2, 2), 0.29),
    ],
)
def test_marginal_pmf_examples(prior, obs, expected):
    assert marginal_pmf(prior, obs) == pytest.approx(expected, abs=1e-15)


def test_membership_point_mass():
    prior = DiscretePrior(((0.35, 1.0),))
    obs = Observation(3, 8)
    est, se = fiducial_membership_prob(prior, obs, 100_000, make_rng(2))
    assert abs(est - marginal_pmf(prior, obs)) <= 3 * se


def test_membership_impossible_event_is_zero():
    est, se = fiducial_membership_prob(DiscretePrior(((0.0, 1.0),)), Observation(2, 5), 10_000, make_rng(3))
    assert est == 0.0 and se == 0.0


def test_membership_poisson():
    prior = DiscretePrior(((0.5, 0.3), (2.0, 0.7)))
    obs = Observation(1)
    est, se = fiducial_membership_prob(prior, obs, 100_000, make_rng(4))
    assert abs(est - marginal_pmf(prior, obs)) <= 3 * se
