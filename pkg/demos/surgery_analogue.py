# %% [markdown]
# A surgery-like dataset
#
# 844 binomial observations with trial counts between 1 and 69 and many zero
# counts.  The data are synthetic; they only mimic the shape of the
# real-world example.  A run of this size takes a few minutes because each
# update touches every observation.

# %%
from fidudeconv import GibbsConfig, estimate_cdf, run_chain
from fidudeconv.cli import describe, synthetic_surgery

data = synthetic_surgery(seed=0)
print(describe(data))

# %%
samples = run_chain(data, GibbsConfig(n_mcmc=300, n_burn=100, seed=0))
est = estimate_cdf(samples, 0.05, "mixture")
for t in (0.01, 0.05, 0.1, 0.25, 0.5):
    p, lo, hi = est.at(t)
    print(f"F({t:.2f}) ~ {p:.3f}  [{lo:.3f}, {hi:.3f}]")
