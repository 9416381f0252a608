# %% [markdown]
# Inspecting one Gibbs update
#
# The feasible region for a single ``(u_i, w_i)`` given the rest of the state
# is a union of rectangles.  ``rects_at`` replays a chain to the moment the
# chosen observation is updated and returns that union.

# %%
from fidudeconv.gibbs import GibbsConfig, rects_at, write_rects_csv
from fidudeconv.obsmodel import Dataset

data = Dataset.binomial([1, 3, 4, 0], [5, 5, 5, 5])
rects = rects_at(data, GibbsConfig(n_mcmc=10, n_burn=0, seed=4), i=1, sweep=3)
print(write_rects_csv(rects), end="")
print("total weight", sum(r.weight for r in rects))
