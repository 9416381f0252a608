# %% [markdown]
# Small coverage study
#
# A reduced version of scenario 1 comparing the fiducial intervals with a
# percentile bootstrap of the empirical CDF of ``x / m``.  Raise
# ``replications`` and ``n_mcmc`` for a study at full scale.

# %%
from fidudeconv.simulate import run_simulation, scenario

cfg = scenario(1, replications=40, n_mcmc=400, n_burn=100, bootstrap_samples=400, seed=3)
report = run_simulation(cfg, jobs=1)
print(f"{report.n_completed} replicates completed, {report.n_failed} failed")

# %%
print(f"{'method':24s} {'p':>5s} {'coverage':>9s} {'length':>8s} {'MSE x1e4':>9s}")
for row in report.rows:
    if row["p"] in (0.25, 0.5, 0.75):
        print(f"{row['method']:24s} {row['p']:5.2f} {row['coverage']:9.3f} {row['mean_length']:8.3f} {row['mse'] * 1e4:9.1f}")
