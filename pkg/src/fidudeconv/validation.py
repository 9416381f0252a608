"""Self-checks run by ``fidudeconv validate``.

Every check returns a :class:`CheckResult` holding one statistic, the
threshold it is compared against and the verdict.  Library functions are
looked up through their modules at call time, so a patched function is what
gets checked.
"""

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import gibbs, obsmodel, oracle, specfun
from .obsmodel import Dataset, Observation
from .rng import make_rng

__all__ = [
    "CheckResult",
    "check_decomposition_grid",
    "check_gibbs_ks",
    "check_inverse_roundtrip",
    "check_membership_identity",
    "check_specfun_roundtrip",
    "check_variance_sanity",
    "decomposition_mismatch",
    "run_checks",
]

KS_INSTANCES = (((3, 3), (0, 3)), ((5, 5, 5), (0, 2, 5)))


@dataclass(frozen=True)
class CheckResult:
    name: str
    statistic: float
    threshold: float
    relation: str  # "<=" or ">="
    passed: bool
    seconds: float = 0.0
    advisory: bool = False
    detail: str = ""

    def line(self):
        verdict = "PASS" if self.passed else ("WARN" if self.advisory else "FAIL")
        text = f"{verdict} {self.name}: statistic={self.statistic:.6g} {self.relation} {self.threshold:.6g} ({self.seconds:.1f}s)"
        return text + (f" [{self.detail}]" if self.detail else "")


def _result(name, stat, threshold, relation, t0, advisory=False, detail=""):
    ok = stat <= threshold if relation == "<=" else stat >= threshold
    return CheckResult(name, float(stat), float(threshold), relation, bool(ok), time.perf_counter() - t0, advisory, detail)


def _bisect(f, q, lo, hi, iters=200):
    # f increasing; returns x with f(x) ~ q
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def check_specfun_roundtrip(n_cases=10_000, seed=0, tol=1e-10, n_bisect=200):
    """Quantile inversions against the forward functions.

    The statistic is the worst of ``|F(F^{-1}(q)) - q|`` over ``n_cases``
    random beta and gamma cases, and of ``|F^{-1}(q) - bisection(q)|`` over
    the first ``n_bisect`` of each.
    """
    t0 = time.perf_counter()
    rng = make_rng(seed)
    half = n_cases // 2
    q = rng.uniform(1e-6, 1 - 1e-6, size=(2, half))
    a, b = rng.uniform(0.5, 70, size=(2, half))
    s = rng.uniform(0.5, 70, size=half)
    xb = specfun.reg_inc_beta_inv(q[0], a, b)
    xg = specfun.reg_inc_gamma_inv(q[1], s)
    err = max(
        np.max(np.abs(specfun.reg_inc_beta(xb, a, b) - q[0])),
        np.max(np.abs(specfun.reg_inc_gamma(xg, s) - q[1])),
    )
    for k in range(min(n_bisect, half)):
        ref = _bisect(lambda x: specfun.reg_inc_beta(x, a[k], b[k]), q[0, k], 0.0, 1.0)
        err = max(err, abs(xb[k] - ref))
        hi = s[k] + 40 * math.sqrt(s[k]) + 40
        ref = _bisect(lambda x: specfun.reg_inc_gamma(x, s[k]), q[1, k], 0.0, hi)
        err = max(err, abs(xg[k] - ref) / max(1.0, ref))
    return _result("specfun round trip", err, tol, "<=", t0)


def check_inverse_roundtrip(m_max=30, grid_points=99):
    """``x = G^{-1}(u, theta)`` must satisfy ``G*(x - 1, u) < theta <= G*(x, u)``.

    The statistic is the fraction of consistent ``(m, theta, u)`` cases.
    """
    t0 = time.perf_counter()
    g = np.arange(1, grid_points + 1) / (grid_points + 1)
    theta, u = (a.ravel() for a in np.meshgrid(g, g, indexing="ij"))
    good = total = 0
    for m in range(1, m_max + 1):
        x = obsmodel.model_inverse(Observation(0, m), u, theta)
        for xv in np.unique(x):
            sel = x == xv
            obs = Observation(int(xv), m)
            lo = obsmodel.g_star_lower(obs, u[sel])
            hi = obsmodel.g_star_upper(obs, u[sel])
            good += int(np.sum((lo < theta[sel]) & (theta[sel] <= hi)))
        total += u.size
    return _result("inverse round trip", good / total, 1.0, ">=", t0, detail=f"{total} cases")


def _random_instance(rng, n_max=4, m_max=5):
    n = int(rng.integers(2, n_max + 1))
    m = rng.integers(1, m_max + 1, size=n)
    x = rng.integers(0, m + 1)
    data = Dataset.binomial(x, m)
    u, w = oracle.rejection_sample(data, 1, rng)
    state = gibbs.LatentState.from_uw(data, u[0], w[0])
    return data, state, int(rng.integers(0, n))


def _oracle_feasible(data, state, i, uu, ww):
    u = np.repeat(state.u[None, :], uu.size, axis=0)
    w = np.repeat(state.w[None, :], uu.size, axis=0)
    u[:, i] = uu.ravel()
    w[:, i] = ww.ravel()
    tl, tu = obsmodel.interval_endpoints(data, u)
    return oracle.batch_feasible(tl, tu, w).reshape(uu.shape)


def decomposition_mismatch(data, state, i, cells=200):
    """Compare the rectangle union for observation ``i`` with a brute-force grid.

    Cells are classified by the feasibility of their centres.  The exact area
    of the region is bracketed by counting cells whose centre and corners
    agree as interior and the rest as boundary cells.

    Returns ``(mismatched_cells, distance of the total weight from the area
    bracket, in cells)``.
    """
    c = (np.arange(cells) + 0.5) / cells
    uu, ww = np.meshgrid(c, c, indexing="ij")
    centre = _oracle_feasible(data, state, i, uu, ww)
    e = np.clip(np.arange(cells + 1) / cells, 1e-12, 1 - 1e-12)
    cu, cw = np.meshgrid(e, e, indexing="ij")
    corner = _oracle_feasible(data, state, i, cu, cw)
    corners = np.stack([corner[:-1, :-1], corner[1:, :-1], corner[:-1, 1:], corner[1:, 1:], centre])
    inside = corners.all(axis=0)
    touched = corners.any(axis=0)
    rects = gibbs.rectangle_decomposition(i, state, data)
    covered = np.zeros(uu.shape, dtype=bool)
    for r in rects:
        if r.weight > 0:
            covered |= (r.u_lo < uu) & (uu < r.u_hi) & (r.w_lo < ww) & (ww < r.w_hi)
    mismatched = int(np.sum(covered != centre))
    weight = sum(r.weight for r in rects) * cells * cells
    lo, hi = inside.sum(), touched.sum()
    gap = max(lo - weight, weight - hi, 0.0)
    return mismatched, float(gap)


def check_decomposition_grid(n_instances=100, seed=0, cells=200):
    """Worst per-instance mismatch between rectangles and the feasibility grid (cells)."""
    t0 = time.perf_counter()
    rng = make_rng(seed)
    worst_cells = worst_area = 0.0
    for _ in range(n_instances):
        data, state, i = _random_instance(rng)
        mis, gap = decomposition_mismatch(data, state, i, cells)
        worst_cells = max(worst_cells, mis)
        worst_area = max(worst_area, gap)
    stat = max(worst_cells, worst_area)
    return _result("decomposition vs grid", stat, 2.0, "<=", t0,
                   detail=f"worst cells {worst_cells:g}, worst area gap {worst_area:.3g} cells")


def check_gibbs_ks(n_draws=20_000, thin=10, seed=0):
    """Largest two-sample KS distance between Gibbs and rejection marginals."""
    t0 = time.perf_counter()
    worst = 0.0
    for k, (m, x) in enumerate(KS_INSTANCES):
        data = Dataset.binomial(x, m)
        cfg = gibbs.GibbsConfig(n_mcmc=n_draws * thin, n_burn=1000, seed=seed + k)
        gu, gw = gibbs.sample_states(data, cfg, thin=thin)
        ru, rw = oracle.rejection_sample(data, n_draws, make_rng(seed + 1000 + k))
        for j in range(data.n):
            worst = max(worst, stats.ks_2samp(gu[:, j], ru[:, j]).statistic,
                        stats.ks_2samp(gw[:, j], rw[:, j]).statistic)
    return _result("Gibbs vs rejection KS", worst, 0.05, "<=", t0)


def _random_prior(rng):
    k = int(rng.integers(1, 5))
    thetas = np.sort(rng.uniform(0.02, 0.98, size=k))
    weights = rng.dirichlet(np.ones(k))
    weights[-1] = 1.0 - weights[:-1].sum()
    return oracle.DiscretePrior(tuple(zip(thetas, weights)))


def check_membership_identity(n_pairs=50, n_draws=100_000, seed=0, need=48):
    """Count of pairs with ``|P(membership) - marginal pmf| <= 3 SE``.

    The SE is the binomial standard error at the marginal pmf.
    """
    t0 = time.perf_counter()
    rng = make_rng(seed)
    hits = 0
    for _ in range(n_pairs):
        prior = _random_prior(rng)
        m = int(rng.integers(1, 11))
        theta = prior.thetas[rng.choice(len(prior.atoms), p=prior.weights)]
        obs = Observation(int(rng.binomial(m, theta)), m)
        est, _ = oracle.fiducial_membership_prob(prior, obs, n_draws, rng)
        pmf = oracle.marginal_pmf(prior, obs)
        se = math.sqrt(pmf * (1 - pmf) / n_draws)
        hits += abs(est - pmf) <= 3 * se
    return _result("membership identity", hits, need, ">=", t0, detail=f"{hits}/{n_pairs} within 3 SE")


def check_variance_sanity(n=30, m=100_000, n_mcmc=500, n_burn=300, seed=0, t=0.5):
    """Fiducial variance of ``F_lower(t)`` against ``F(t)(1 - F(t))/n`` under Beta(2, 2).

    The statistic is ``|log2(ratio)|``; advisory, since the reference is asymptotic.
    """
    t0 = time.perf_counter()
    rng = make_rng(seed)
    g1, g2 = rng.standard_gamma(2.0, n), rng.standard_gamma(2.0, n)
    p = g1 / (g1 + g2)
    data = Dataset.binomial(rng.binomial(m, p), m)
    cfg = gibbs.GibbsConfig(n_mcmc=n_mcmc, n_burn=n_burn, seed=seed, grid=np.array([t]))
    fs = gibbs.run_chain(data, cfg)
    F = float(specfun.reg_inc_beta(t, 2.0, 2.0))
    ratio = float(np.var(fs.lower[:, 0])) / (F * (1 - F) / n)
    # |log2 ratio| <= 1 is the band [0.5, 2]
    return _result("variance sanity", abs(math.log2(ratio)) if ratio > 0 else math.inf, 1.0, "<=", t0,
                   advisory=True, detail=f"variance ratio {ratio:.3f}, target F(1-F)/n = {F * (1 - F) / n:.5f}")

def run_checks(level="quick", seed=0, report=None):
    """Run the ``quick`` or ``full`` battery; ``report`` receives each result as it finishes."""
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    checks = [
        lambda: check_specfun_roundtrip(seed=seed),
        lambda: check_inverse_roundtrip(),
        lambda: check_decomposition_grid(n_instances=20 if level == "quick" else 100, seed=seed),
    ]
    if level == "full":
        checks += [
            lambda: check_gibbs_ks(seed=seed),
            lambda: check_membership_identity(seed=seed),
            lambda: check_variance_sanity(seed=seed),
        ]
    results = []
    for make in checks:
        r = make()
        results.append(r)
        if report:
            report(r)
    return results
