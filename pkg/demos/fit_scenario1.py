# %% [markdown]
# Fiducial CDF estimate for one binomial dataset
#
# Fifty success probabilities are drawn from Beta(5, 5), each observed through
# twenty binomial trials.  The Gibbs sampler gives draws of lower and upper
# CDF bounds, which are summarised as a point estimate and two interval types.

# %%
import numpy as np

from fidudeconv import Dataset, GibbsConfig, chain_diagnostics, estimate_cdf, run_chain
from fidudeconv.rng import make_rng
from fidudeconv.specfun import reg_inc_beta

rng = make_rng(1)
theta = rng.beta(5, 5, size=50)
data = Dataset.binomial(rng.binomial(20, theta), 20)
print("counts:", np.bincount(data.x, minlength=21))

# %%
samples = run_chain(data, GibbsConfig(n_mcmc=1000, n_burn=300, seed=1))
mix = estimate_cdf(samples, 0.05, "mixture")
con = estimate_cdf(samples, 0.05, "conservative")

# %%
print(" t     truth  point  mixture CI      conservative CI")
for t in (0.25, 0.4, 0.5, 0.6, 0.75):
    p, lo, hi = mix.at(t)
    _, clo, chi = con.at(t)
    print(f"{t:.2f}  {reg_inc_beta(t, 5.0, 5.0):.3f}  {p:.3f}  [{lo:.3f}, {hi:.3f}]  [{clo:.3f}, {chi:.3f}]")

# %% [markdown]
# The trace of the mean of the mixture CDF is a quick mixing check.

# %%
diag = chain_diagnostics(samples)
print(f"mean trace: {diag.mean_trace.mean():.4f} +- {diag.mean_trace.std():.4f}, lag-1 autocorrelation {diag.lag1_autocorr:.3f}")
