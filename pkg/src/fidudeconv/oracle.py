"""Brute-force references for small instances.

* :func:`rejection_sample` draws ``(u, w)`` exactly uniform on the feasible set
  by proposing from the unit cube, the reference for the Gibbs sampler.
* :func:`fiducial_membership_prob` estimates, for one observation and a fixed
  discrete CDF ``F``, the probability that ``F`` satisfies that observation's
  interval constraint.  It should equal the marginal pmf of the observation
  under ``F`` (:func:`marginal_pmf`), which makes the fiducial probability of
  ``F`` proportional to the nonparametric likelihood.
"""

import math
from dataclasses import dataclass

import numpy as np

from .gibbs import LatentState, constraint_check
from .obsmodel import interval_endpoints, g_star_lower, g_star_upper

__all__ = [
    "DiscretePrior",
    "batch_feasible",
    "OracleTimeoutError",
    "fiducial_membership_prob",
    "marginal_pmf",
    "rejection_sample",
]

MAX_ORACLE_N = 5
MIN_ACCEPTANCE = 1e-4
_BATCH = 20_000


class OracleTimeoutError(RuntimeError):
    """The rejection sampler's acceptance rate fell below the floor."""


@dataclass(frozen=True)
class DiscretePrior:
    atoms: tuple  # ((theta, weight), ...)

    def __post_init__(self):
        atoms = tuple((float(t), float(p)) for t, p in self.atoms)
        if not atoms:
            raise ValueError("a prior needs at least one atom")
        thetas = np.array([t for t, _ in atoms])
        weights = np.array([p for _, p in atoms])
        if np.any(weights <= 0):
            raise ValueError("atom weights must be positive")
        if not math.isclose(weights.sum(), 1.0, rel_tol=0, abs_tol=1e-12):
            raise ValueError("atom weights must sum to 1")
        if np.any(np.diff(thetas) <= 0):
            raise ValueError("atoms must be strictly increasing")
        object.__setattr__(self, "atoms", atoms)

    @property
    def thetas(self):
        return np.array([t for t, _ in self.atoms])

    @property
    def weights(self):
        return np.array([p for _, p in self.atoms])

    def cdf(self, t):
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(self.thetas, t, side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)


def batch_feasible(tl, tu, w):
    """Feasibility flags ``(k,)`` for ``k`` stacked states given as ``(k, n)`` arrays."""
    disjoint = tu[:, :, None] <= tl[:, None, :]
    ordered = w[:, :, None] < w[:, None, :]
    n = tl.shape[1]
    disjoint[:, np.arange(n), np.arange(n)] = False
    return ~np.any(disjoint & ~ordered, axis=(1, 2))


def rejection_sample(data, n_draws, rng, min_acceptance=MIN_ACCEPTANCE):
    """Exactly ``n_draws`` states uniform on the feasible set.

    Returns ``(u, w)`` arrays of shape ``(n_draws, n)``.
    """
    if data.n > MAX_ORACLE_N:
        raise ValueError(f"rejection oracle is limited to n <= {MAX_ORACLE_N}")
    if n_draws < 1:
        raise ValueError("n_draws must be positive")
    us, ws = [], []
    kept = proposed = 0
    while kept < n_draws:
        u = rng.random((_BATCH, data.n))
        w = rng.random((_BATCH, data.n))
        tl, tu = interval_endpoints(data, u)
        ok = batch_feasible(tl, tu, w)
        proposed += _BATCH
        kept += int(ok.sum())
        us.append(u[ok])
        ws.append(w[ok])
        if proposed >= 10 * _BATCH and kept / proposed < min_acceptance:
            raise OracleTimeoutError(f"acceptance rate {kept / proposed:.2e} below {min_acceptance:g}")
    u = np.concatenate(us)[:n_draws]
    w = np.concatenate(ws)[:n_draws]
    check = LatentState.from_uw(data, u[0], w[0])
    assert constraint_check(check)
    return u, w


def _pmf(theta, obs):
    theta = np.asarray(theta, dtype=float)
    if obs.m is None:
        with np.errstate(divide="ignore"):
            logp = obs.x * np.log(theta) - theta - math.lgamma(obs.x + 1)
        logp = np.where(theta == 0, 0.0 if obs.x == 0 else -np.inf, logp)
        return np.exp(logp)
    return math.comb(obs.m, obs.x) * theta**obs.x * (1 - theta) ** (obs.m - obs.x)


def marginal_pmf(prior, obs):
    """Sum over atoms of weight * P(X = x | theta)."""
    return float(np.sum(prior.weights * _pmf(prior.thetas, obs)))


def fiducial_membership_prob(prior, obs, n_draws, rng):
    """Monte Carlo estimate of P(F(theta_lower(U)) < W <= F(theta_upper(U))).

    Returns ``(estimate, standard_error)``.
    """
    u = rng.random(n_draws)
    w = rng.random(n_draws)
    # u is in [0, 1); a zero draw has probability 2**-53 but is outside the endpoint domain
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    lo = prior.cdf(g_star_lower(obs, u))
    hi = prior.cdf(g_star_upper(obs, u))
    hits = (lo < w) & (w <= hi)
    p = hits.mean()
    return float(p), float(math.sqrt(p * (1 - p) / n_draws))
