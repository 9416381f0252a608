# %% [markdown]
# Checking the sampler against brute force
#
# For tiny datasets the joint fiducial law of ``(U, W)`` can be sampled by
# rejection: draw everything uniformly and keep feasible draws.  The Gibbs
# sampler must agree with it.

# %%
from scipy import stats

from fidudeconv.gibbs import GibbsConfig, sample_states
from fidudeconv.obsmodel import Dataset, Observation
from fidudeconv.oracle import DiscretePrior, fiducial_membership_prob, marginal_pmf, rejection_sample
from fidudeconv.rng import make_rng

data = Dataset.binomial([0, 2, 5], [5, 5, 5])
gu, gw = sample_states(data, GibbsConfig(n_mcmc=50_000, n_burn=1000, seed=0), thin=10)
ru, rw = rejection_sample(data, 5000, make_rng(1))
for j in range(data.n):
    print(f"obs {j}: KS(u) {stats.ks_2samp(gu[:, j], ru[:, j]).statistic:.3f}  KS(w) {stats.ks_2samp(gw[:, j], rw[:, j]).statistic:.3f}")

# %% [markdown]
# When the latent parameters follow a known discrete law, the fiducial
# probability that the true parameter lies in the set-valued inverse equals
# the marginal probability of the observed count.

# %%
prior = DiscretePrior(((0.2, 0.3), (0.5, 0.5), (0.9, 0.2)))
obs = Observation(4, 8)
est, se = fiducial_membership_prob(prior, obs, 100_000, make_rng(2))
print(f"membership {est:.4f} +- {se:.4f}, marginal pmf {marginal_pmf(prior, obs):.4f}")
