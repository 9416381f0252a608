"""Monte Carlo study of the fiducial estimators against a bootstrap baseline.

Each replicate draws latent parameters from a known prior, simulates counts,
runs the fiducial chain and the nonparametric bootstrap, and records point
estimates and 95% intervals at a few evaluation points.  Replicates are
independent (each has its own derived random stream), so the aggregated
report does not depend on how many worker processes ran them.
"""

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .gibbs import GibbsConfig, run_chain
from .inference import CdfEstimate, QUANTILE_CONVENTION, estimate_cdf, isotonize, nearest_rank
from .obsmodel import Dataset, Observation, g_star_upper
from .rng import make_rng, replicate_rng
from .specfun import reg_inc_beta

__all__ = [
    "AtomPrior",
    "BetaMixturePrior",
    "BetaPrior",
    "METHODS",
    "ReplicateResult",
    "ScenarioConfig",
    "SimulationReport",
    "TruncatedExpPrior",
    "aggregate_metrics",
    "bootstrap_estimate",
    "default_grid",
    "generate_dataset",
    "load_scenario_config",
    "prior_from_dict",
    "run_replication",
    "run_simulation",
    "sample_prior",
    "scenario",
]

METHODS = ("fiducial_mixture", "fiducial_conservative", "bootstrap")
# comparator columns of the published study that this package does not compute
ABSENT_METHODS = ("g_modeling", "g_modeling_bias_corrected", "dirichlet_process_bayes")
REPORT_SCHEMA_VERSION = 1
DEFAULT_EVAL_POINTS = (0.15, 0.25, 0.5, 0.75, 0.85)


# ---------------------------------------------------------------------------
# priors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BetaPrior:
    a: float
    b: float

    def sample(self, rng, size=None):
        g1 = rng.standard_gamma(self.a, size)
        g2 = rng.standard_gamma(self.b, size)
        return g1 / (g1 + g2)

    def cdf(self, t):
        return reg_inc_beta(np.clip(t, 0.0, 1.0), self.a, self.b)

    def to_dict(self):
        return {"type": "beta", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class BetaMixturePrior:
    components: tuple  # ((weight, a, b), ...)

    def __post_init__(self):
        comps = tuple((float(w), float(a), float(b)) for w, a, b in self.components)
        if not math.isclose(sum(c[0] for c in comps), 1.0, abs_tol=1e-12):
            raise ValueError("mixture weights must sum to 1")
        object.__setattr__(self, "components", comps)

    def sample(self, rng, size=None):
        weights = [c[0] for c in self.components]
        which = rng.choice(len(self.components), size=size, p=weights)
        g1 = rng.standard_gamma(np.array([c[1] for c in self.components])[which])
        g2 = rng.standard_gamma(np.array([c[2] for c in self.components])[which])
        return g1 / (g1 + g2)

    def cdf(self, t):
        t = np.clip(t, 0.0, 1.0)
        return sum(w * reg_inc_beta(t, a, b) for w, a, b in self.components)

    def to_dict(self):
        return {"type": "beta_mixture", "components": [list(c) for c in self.components]}


@dataclass(frozen=True)
class TruncatedExpPrior:
    rate: float
    cutoff: float

    def quantile(self, q):
        return -np.log1p(-q * -np.expm1(-self.rate * self.cutoff)) / self.rate

    def sample(self, rng, size=None):
        return self.quantile(rng.random(size))

    def cdf(self, t):
        t = np.clip(t, 0.0, self.cutoff)
        return np.expm1(-self.rate * t) / np.expm1(-self.rate * self.cutoff)

    def to_dict(self):
        return {"type": "truncated_exponential", "rate": self.rate, "cutoff": self.cutoff}


@dataclass(frozen=True)
class AtomPrior:
    atoms: tuple  # ((theta, weight), ...)

    def __post_init__(self):
        atoms = tuple(sorted((float(t), float(p)) for t, p in self.atoms))
        if not math.isclose(sum(p for _, p in atoms), 1.0, abs_tol=1e-12):
            raise ValueError("atom weights must sum to 1")
        object.__setattr__(self, "atoms", atoms)

    def sample(self, rng, size=None):
        thetas = np.array([t for t, _ in self.atoms])
        return thetas[rng.choice(len(thetas), size=size, p=[p for _, p in self.atoms])]

    def cdf(self, t):
        thetas = np.array([a for a, _ in self.atoms])
        cum = np.cumsum([p for _, p in self.atoms])
        idx = np.searchsorted(thetas, t, side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def to_dict(self):
        return {"type": "atoms", "atoms": [list(a) for a in self.atoms]}


def prior_from_dict(spec):
    kind = spec.get("type")
    if kind == "beta":
        return BetaPrior(float(spec["a"]), float(spec["b"]))
    if kind == "beta_mixture":
        return BetaMixturePrior(tuple(tuple(c) for c in spec["components"]))
    if kind == "truncated_exponential":
        return TruncatedExpPrior(float(spec["rate"]), float(spec["cutoff"]))
    if kind == "atoms":
        return AtomPrior(tuple(tuple(a) for a in spec["atoms"]))
    raise ValueError(f"unknown prior type {kind!r}")


def sample_prior(prior, rng, size=None):
    return prior.sample(rng, size)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    id: object = "custom"
    prior: object = field(default_factory=lambda: BetaPrior(5.0, 5.0))
    n: int = 50
    m_spec: object = 20  # int, or (lo, hi) for integers uniform on [lo, hi]
    replications: int = 200
    seed: int = 0
    n_mcmc: int = 1000
    n_burn: int = 300
    init: str = "random"
    eval_points: tuple = DEFAULT_EVAL_POINTS
    alpha: float = 0.05
    bootstrap_samples: int = 1000
    model: str = "binomial"
    grid: tuple | None = None

    def __post_init__(self):
        if self.n < 1 or self.replications < 1:
            raise ValueError("n and replications must be positive")
        m = self.m_spec
        if self.model == "binomial":
            if isinstance(m, (tuple, list)):
                lo, hi = (int(v) for v in m)
                if not 1 <= lo <= hi:
                    raise ValueError("m range must satisfy 1 <= lo <= hi")
                object.__setattr__(self, "m_spec", (lo, hi))
            elif int(m) < 1:
                raise ValueError("m must be at least 1")
        elif self.model != "poisson":
            raise ValueError(f"unknown model {self.model!r}")
        object.__setattr__(self, "eval_points", tuple(float(p) for p in self.eval_points))
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))

    def to_dict(self):
        d = asdict(self)
        d["prior"] = self.prior.to_dict()
        d["m_spec"] = list(self.m_spec) if isinstance(self.m_spec, tuple) else self.m_spec
        d["eval_points"] = list(self.eval_points)
        d["grid"] = None if self.grid is None else list(self.grid)
        return d


_SCENARIOS = {
    1: dict(prior=BetaPrior(5.0, 5.0), n=50, m_spec=20),
    2: dict(prior=BetaMixturePrior(((0.5, 10.0, 30.0), (0.5, 30.0, 10.0))), n=50, m_spec=20),
    3: dict(prior=BetaPrior(8.0, 8.0), n=100, m_spec=(100, 200)),
    4: dict(prior=BetaMixturePrior(((0.5, 60.0, 10.0), (0.5, 10.0, 60.0))), n=100, m_spec=100),
    5: dict(prior=TruncatedExpPrior(8.0, 1.0), n=200, m_spec=100),
}


def scenario(k, **overrides):
    """Configuration for one of the five published simulation settings."""
    if k not in _SCENARIOS:
        raise ValueError(f"scenario must be one of {sorted(_SCENARIOS)}")
    return ScenarioConfig(id=k, **{**_SCENARIOS[k], **overrides})


def load_scenario_config(path):
    """Read a YAML (or JSON) scenario file into a :class:`ScenarioConfig`."""
    import yaml

    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ValueError("scenario config must be a mapping")
    raw = dict(raw)
    sid = raw.pop("scenario", raw.pop("id", "custom"))
    if "prior" in raw:
        raw["prior"] = prior_from_dict(raw["prior"])
    mcmc = raw.pop("mcmc", None) or {}
    for key, dest in (("n_mcmc", "n_mcmc"), ("burn_in", "n_burn"), ("n_burn", "n_burn"), ("init", "init")):
        if key in mcmc:
            raw[dest] = mcmc.pop(key)
    if mcmc:
        raise ValueError(f"unknown mcmc keys: {sorted(mcmc)}")
    if "m" in raw:
        raw["m_spec"] = raw.pop("m")
    if isinstance(raw.get("m_spec"), list):
        raw["m_spec"] = tuple(raw["m_spec"])
    known = set(ScenarioConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if sid != "custom":
        return scenario(int(sid), **raw)
    return ScenarioConfig(id="custom", **raw)


# ---------------------------------------------------------------------------
# data and estimators
# ---------------------------------------------------------------------------


def generate_dataset(cfg, rng):
    """Simulated dataset plus the latent parameters that produced it."""
    thetas = np.asarray(cfg.prior.sample(rng, cfg.n), dtype=float)
    if cfg.model == "poisson":
        x = rng.poisson(thetas)
        return Dataset.poisson(x), thetas
    if isinstance(cfg.m_spec, tuple):
        m = rng.integers(cfg.m_spec[0], cfg.m_spec[1] + 1, size=cfg.n)
    else:
        m = np.full(cfg.n, int(cfg.m_spec))
    x = rng.binomial(m, thetas)
    return Dataset.binomial(x, m), thetas


def default_grid(data, eval_points=()):
    """0.01..0.99 for binomial data; 200 points on [0, max G*(x_i, 0.001)] for Poisson."""
    if data.model == "binomial":
        grid = np.arange(1, 100) / 100
    else:
        top = max(g_star_upper(Observation(int(x)), 0.001) for x in data.x)
        grid = np.linspace(0.0, top, 200)
    return np.unique(np.concatenate([grid, np.asarray(eval_points, dtype=float)]))


def bootstrap_estimate(data, B, alpha, rng, grid):
    """ECDF of per-observation MLEs with a percentile bootstrap interval."""
    grid = np.asarray(grid, dtype=float)
    est = data.x / data.m if data.model == "binomial" else data.x.astype(float)
    point = np.searchsorted(np.sort(est), grid, side="right") / data.n
    boot = np.empty((B, grid.size))
    for b in range(B):
        resample = np.sort(est[rng.integers(0, data.n, data.n)])
        boot[b] = np.searchsorted(resample, grid, side="right") / data.n
    lo = nearest_rank(boot, alpha / 2)
    hi = nearest_rank(boot, 1 - alpha / 2)
    point, lo, hi = isotonize(point, lo, hi)
    return CdfEstimate(grid, point, lo, hi, float(alpha), "bootstrap")


# ---------------------------------------------------------------------------
# replication and aggregation
# ---------------------------------------------------------------------------


@dataclass
class ReplicateResult:
    index: int
    ok: bool
    truth: np.ndarray
    oracle_ecdf: np.ndarray | None = None
    point: dict = field(default_factory=dict)
    lower: dict = field(default_factory=dict)
    upper: dict = field(default_factory=dict)
    error: str | None = None


def run_replication(cfg, index):
    """One simulated dataset through all estimators; deterministic in (cfg.seed, index)."""
    rng = replicate_rng(cfg.seed, index)
    truth = np.asarray(cfg.prior.cdf(np.asarray(cfg.eval_points)), dtype=float)
    data, thetas = generate_dataset(cfg, rng)
    pts = np.asarray(cfg.eval_points)
    oracle = (thetas[:, None] <= pts[None, :]).mean(axis=0)
    result = ReplicateResult(index, True, truth, oracle)
    grid = np.asarray(cfg.grid, dtype=float) if cfg.grid is not None else default_grid(data, pts)
    grid = np.unique(np.concatenate([grid, pts]))
    idx = np.searchsorted(grid, pts)
    chain_seed = int(rng.integers(0, 2**63))
    try:
        gcfg = GibbsConfig(cfg.n_mcmc, cfg.n_burn, chain_seed, cfg.init, grid)
        samples = run_chain(data, gcfg)
        estimates = {
            "fiducial_mixture": estimate_cdf(samples, cfg.alpha, "mixture"),
            "fiducial_conservative": estimate_cdf(samples, cfg.alpha, "conservative"),
        }
    except Exception as exc:  # recorded and counted, never resampled
        result.ok = False
        result.error = f"{type(exc).__name__}: {exc}"
        return result
    estimates["bootstrap"] = bootstrap_estimate(data, cfg.bootstrap_samples, cfg.alpha, rng, grid)
    for name, est in estimates.items():
        result.point[name] = est.point[idx]
        result.lower[name] = est.ci_lower[idx]
        result.upper[name] = est.ci_upper[idx]
    return result


@dataclass
class SimulationReport:
    rows: list
    config: dict
    n_requested: int
    n_completed: int
    n_failed: int
    failures: list
    metadata: dict

    CSV_COLUMNS = (
        "method", "p", "truth_mean", "mse", "mse_se", "coverage", "coverage_se", "covered",
        "mean_length", "mean_length_se", "n_completed", "n_failed",
    )

    def row(self, method, p):
        for r in self.rows:
            if r["method"] == method and r["p"] == p:
                return r
        raise KeyError((method, p))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.CSV_COLUMNS)
            for r in self.rows:
                writer.writerow([_fmt(r[c]) for c in self.CSV_COLUMNS])

    def summary(self):
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "config": self.config,
            "replications_requested": self.n_requested,
            "replications_completed": self.n_completed,
            "replications_failed": self.n_failed,
            "failures": self.failures,
            "absent_methods": list(ABSENT_METHODS),
            "metadata": self.metadata,
            "rows": self.rows,
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _se(values):
    if values.size < 2:
        return None
    return float(np.std(values, ddof=1) / math.sqrt(values.size))


def aggregate_metrics(results, eval_points, config=None, n_requested=None):
    """MSE, coverage and mean interval length per method and evaluation point."""
    results = sorted(results, key=lambda r: r.index)
    done = [r for r in results if r.ok]
    failed = [r for r in results if not r.ok]
    if not done:
        raise ValueError("no completed replicates to aggregate")
    rows = []
    for method in METHODS:
        point = np.array([r.point[method] for r in done])
        lo = np.array([r.lower[method] for r in done])
        hi = np.array([r.upper[method] for r in done])
        truth = np.array([r.truth for r in done])
        for j, p in enumerate(eval_points):
            sq = (point[:, j] - truth[:, j]) ** 2
            hit = (lo[:, j] <= truth[:, j]) & (truth[:, j] <= hi[:, j])
            length = hi[:, j] - lo[:, j]
            k = len(done)
            cov = float(hit.sum() / k)
            rows.append({
                "method": method,
                "p": float(p),
                "truth_mean": float(truth[:, j].mean()),
                "mse": float(sq.mean()),
                "mse_se": _se(sq),
                "coverage": cov,
                "coverage_se": float(math.sqrt(cov * (1 - cov) / k)) if k >= 2 else None,
                "covered": int(hit.sum()),
                "mean_length": float(length.mean()),
                "mean_length_se": _se(length),
                "n_completed": k,
                "n_failed": len(failed),
            })
    return SimulationReport(
        rows=rows,
        config=config or {},
        n_requested=len(results) if n_requested is None else n_requested,
        n_completed=len(done),
        n_failed=len(failed),
        failures=[{"index": r.index, "error": r.error} for r in failed],
        metadata={
            "quantile_convention": QUANTILE_CONVENTION,
            "bootstrap_interval": "percentile",
            "median_convention": "mean of central order statistics",
            "replicate_streams": "SeedSequence(seed, spawn_key=(index,))",
            "grid": "0.01..0.99 step 0.01 plus eval points (binomial); "
                    "200 points on [0, max_i G*(x_i, 0.001)] plus eval points (poisson)",
        },
    )


def _replicate_worker(args):
    cfg, index = args
    return run_replication(cfg, index)


def run_simulation(cfg, jobs=1, progress=None):
    """All replicates of ``cfg``, optionally across ``jobs`` worker processes."""
    tasks = [(cfg, k) for k in range(cfg.replications)]
    if jobs <= 1:
        results = []
        for t in tasks:
            results.append(_replicate_worker(t))
            if progress:
                progress(len(results), cfg.replications)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_replicate_worker, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    return aggregate_metrics(results, cfg.eval_points, cfg.to_dict(), cfg.replications)


def with_overrides(cfg, **kw):
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})


def scenario_truth(cfg, points):
    return np.asarray(cfg.prior.cdf(np.asarray(points, dtype=float)), dtype=float)


def make_study_rng(seed):
    return make_rng(seed)
