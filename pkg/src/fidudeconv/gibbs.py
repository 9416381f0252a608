"""Gibbs sampler for (U, W) uniform on the fiducial feasibility set.

A configuration ``(u, w)`` is feasible when, for every ordered pair
``(i, j)``, ``theta_upper[i] <= theta_lower[j]`` implies ``w[i] < w[j]``.
Given the other observations, the feasible region for ``(u_i, w_i)`` is a
union of axis-aligned rectangles; one Gibbs update draws a rectangle with
probability proportional to its area and a uniform point inside it.  Each
sweep updates ``i = 0..n-1`` in order and then redraws the values of ``w``
keeping their rank order.

Fiducial draws are the lower/upper bounds

    F_lower(t) = max{w_i : theta_upper[i] <= t}   (0 if empty)
    F_upper(t) = min{w_i : theta_lower[i] >= t}   (1 if empty)

evaluated on a fixed grid.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .obsmodel import gcdf, gstar, interval_endpoints, deterministic_init_theta
from .rng import make_rng
from .specfun import DEFAULT_ACCURACY, ConvergenceError

__all__ = [
    "BoundSample",
    "ChainDiagnostics",
    "FiducialSamples",
    "GibbsConfig",
    "InfeasibleStateError",
    "LatentState",
    "Rect",
    "chain_diagnostics",
    "constraint_check",
    "evaluate_bounds",
    "gibbs_update_one",
    "init_deterministic",
    "init_random",
    "initialize",
    "rectangle_decomposition",
    "rects_at",
    "resample_w_order",
    "run_chain",
    "sample_states",
    "write_rects_csv",
]

# boundary offset used when the pooled initial parameter sits on the edge of the support
INIT_EPS = 1e-6
_CHUNK = 256
_ACC = DEFAULT_ACCURACY

_OK = 0
_EMPTY_REGION = 1
_NUMERIC = 2


class InfeasibleStateError(RuntimeError):
    """The conditional feasible region of an update has zero area."""


@dataclass(frozen=True)
class LatentState:
    u: np.ndarray
    w: np.ndarray
    theta_lower: np.ndarray
    theta_upper: np.ndarray

    @classmethod
    def from_uw(cls, data, u, w):
        u = np.array(u, dtype=float)
        w = np.array(w, dtype=float)
        if u.shape != (data.n,) or w.shape != (data.n,):
            raise ValueError(f"u and w must have shape ({data.n},)")
        lo, hi = interval_endpoints(data, u)
        return cls(u, w, lo, hi)

    @property
    def n(self):
        return self.u.shape[0]

    def copy(self):
        return LatentState(self.u.copy(), self.w.copy(), self.theta_lower.copy(), self.theta_upper.copy())


@dataclass(frozen=True)
class GibbsConfig:
    n_mcmc: int = 2000
    n_burn: int = 500
    seed: int = 0
    init: str = "random"
    grid: np.ndarray = field(default_factory=lambda: np.round(np.arange(1, 100) / 100, 2))

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.size < 1:
            raise ValueError("grid must be a nonempty 1-d sequence")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if self.n_mcmc < 1:
            raise ValueError("n_mcmc must be at least 1")
        if self.n_burn < 0:
            raise ValueError("n_burn must be nonnegative")
        if self.init not in ("random", "deterministic"):
            raise ValueError("init must be 'random' or 'deterministic'")
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class Rect:
    u_lo: float
    u_hi: float
    w_lo: float
    w_hi: float
    weight: float


@dataclass(frozen=True)
class BoundSample:
    grid: np.ndarray
    f_lower: np.ndarray
    f_upper: np.ndarray


class FiducialSamples:
    """``n_mcmc`` fiducial draws stored as two ``(n_mcmc, n_grid)`` arrays.

    Behaves as a sequence of :class:`BoundSample`.
    """

    def __init__(self, grid, lower, upper):
        self.grid = np.asarray(grid, dtype=float)
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape or self.lower.shape[1:] != self.grid.shape:
            raise ValueError("lower/upper must have shape (n_samples, n_grid)")

    @classmethod
    def from_samples(cls, samples):
        if isinstance(samples, FiducialSamples):
            return samples
        samples = list(samples)
        if not samples:
            raise ValueError("need at least one sample")
        grid = samples[0].grid
        return cls(grid, np.stack([s.f_lower for s in samples]), np.stack([s.f_upper for s in samples]))

    def __len__(self):
        return self.lower.shape[0]

    def __getitem__(self, k):
        if isinstance(k, slice):
            return FiducialSamples(self.grid, self.lower[k], self.upper[k])
        return BoundSample(self.grid, self.lower[k], self.upper[k])

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _decompose(i, model, m, x, w, tl, tu, us, wup, wlp):
    """Fill sorted u breakpoints and the running w envelopes for observation i."""
    n = w.shape[0]
    size = 2 * n
    vals = np.empty(size)
    wu = np.empty(size)
    wl = np.empty(size)
    k = 0
    for j in range(n):
        if j == i:
            continue
        vals[k] = gcdf(model, m[i], x[i], tl[j])
        wu[k] = w[j]
        wl[k] = 0.0
        vals[n - 1 + k] = gcdf(model, m[i], x[i] - 1, tu[j])
        wu[n - 1 + k] = 1.0
        wl[n - 1 + k] = w[j]
        k += 1
    vals[size - 2] = 0.0
    wu[size - 2] = 1.0
    wl[size - 2] = 1.0
    vals[size - 1] = 1.0
    wu[size - 1] = 0.0
    wl[size - 1] = 0.0
    order = np.argsort(vals, kind="mergesort")
    cur = 1.0
    for k in range(size):
        us[k] = vals[order[k]]
        cur = min(cur, wu[order[k]])
        wup[k] = cur
    cur = 0.0
    for k in range(size - 1, -1, -1):
        cur = max(cur, wl[order[k]])
        wlp[k] = cur


@njit(cache=True)
def _pick(us, wup, wlp, r):
    nrect = us.shape[0] - 1
    total = 0.0
    for k in range(nrect):
        h = wup[k] - wlp[k + 1]
        if h > 0.0:
            total += (us[k + 1] - us[k]) * h
    if not total > 0.0:
        return -1
    target = r * total
    acc = 0.0
    last = -1
    for k in range(nrect):
        h = wup[k] - wlp[k + 1]
        if h > 0.0:
            wt = (us[k + 1] - us[k]) * h
            if wt > 0.0:
                last = k
                acc += wt
                if target < acc:
                    return k
    return last


@njit(cache=True)
def _update_one(i, model, m, x, u, w, tl, tu, r_rect, r_a, r_b, us, wup, wlp, abs_tol, rel_tol, max_iter):
    _decompose(i, model, m, x, w, tl, tu, us, wup, wlp)
    k = _pick(us, wup, wlp, r_rect)
    if k < 0:
        return _EMPTY_REGION
    ui = us[k] + (us[k + 1] - us[k]) * r_a
    wi = wup[k] - (wup[k] - wlp[k + 1]) * r_b
    lo = gstar(model, m[i], x[i] - 1, ui, abs_tol, rel_tol, max_iter)
    hi = gstar(model, m[i], x[i], ui, abs_tol, rel_tol, max_iter)
    if np.isnan(lo) or np.isnan(hi):
        return _NUMERIC
    u[i] = ui
    w[i] = wi
    tl[i] = lo
    tu[i] = hi
    return _OK


@njit(cache=True)
def _resample_w(w, fresh):
    ranks = np.argsort(w, kind="mergesort")
    vals = np.sort(fresh)
    for k in range(w.shape[0]):
        w[ranks[k]] = vals[k]


@njit(cache=True)
def _bounds(w, tl, tu, grid, f_lower, f_upper):
    n = w.shape[0]
    ou = np.argsort(tu, kind="mergesort")
    tu_s = tu[ou]
    runmax = np.empty(n)
    cur = 0.0
    for k in range(n):
        cur = max(cur, w[ou[k]])
        runmax[k] = cur
    ol = np.argsort(tl, kind="mergesort")
    tl_s = tl[ol]
    revmin = np.empty(n)
    cur = 1.0
    for k in range(n - 1, -1, -1):
        cur = min(cur, w[ol[k]])
        revmin[k] = cur
    cnt = np.searchsorted(tu_s, grid, side="right")
    idx = np.searchsorted(tl_s, grid, side="left")
    for j in range(grid.shape[0]):
        f_lower[j] = runmax[cnt[j] - 1] if cnt[j] > 0 else 0.0
        f_upper[j] = revmin[idx[j]] if idx[j] < n else 1.0


@njit(cache=True)
def _sweeps(model, m, x, u, w, tl, tu, r_upd, r_res, grid, rec_bounds, out_lower, out_upper,
            thin, rec_states, out_u, out_w, offset, abs_tol, rel_tol, max_iter):
    n = u.shape[0]
    us = np.empty(2 * n)
    wup = np.empty(2 * n)
    wlp = np.empty(2 * n)
    for s in range(r_upd.shape[0]):
        for i in range(n):
            code = _update_one(i, model, m, x, u, w, tl, tu, r_upd[s, i, 0], r_upd[s, i, 1],
                               r_upd[s, i, 2], us, wup, wlp, abs_tol, rel_tol, max_iter)
            if code != _OK:
                return code
        _resample_w(w, r_res[s])
        if rec_bounds:
            _bounds(w, tl, tu, grid, out_lower[offset + s], out_upper[offset + s])
        if rec_states and (offset + s + 1) % thin == 0:
            row = (offset + s + 1) // thin - 1
            out_u[row, :] = u
            out_w[row, :] = w
    return _OK


def _raise_for(code, i=None):
    if code == _EMPTY_REGION:
        where = "" if i is None else f" for observation {i}"
        raise InfeasibleStateError(f"conditional feasible region has zero area{where}")
    if code == _NUMERIC:
        raise ConvergenceError("endpoint inversion did not converge inside the sampler")


# ---------------------------------------------------------------------------
# state-level operations
# ---------------------------------------------------------------------------


def constraint_check(state, data=None):
    """True iff ``theta_upper[i] <= theta_lower[j]`` implies ``w[i] < w[j]`` for all pairs."""
    tu = state.theta_upper[:, None]
    tl = state.theta_lower[None, :]
    disjoint = tu <= tl
    np.fill_diagonal(disjoint, False)
    ordered = state.w[:, None] < state.w[None, :]
    return not np.any(disjoint & ~ordered)


def init_random(data, rng):
    """Uniform (u, w) with w re-ranked to follow the interval midpoints."""
    u = rng.random(data.n)
    w = np.sort(rng.random(data.n))
    lo, hi = interval_endpoints(data, u)
    order = np.argsort((lo + hi) / 2, kind="stable")
    w_ranked = np.empty(data.n)
    w_ranked[order] = w
    return LatentState(u, w_ranked, lo, hi)


def init_deterministic(data, rng):
    """Every interval contains the pooled parameter estimate.

    ``u_i`` is uniform on ``(G(x_i - 1, t), G(x_i, t))`` with ``t`` the pooled
    estimate (moved to ``INIT_EPS`` when it sits at 0).  If floating-point
    saturation breaks the shared-point property for some interval, ``w`` is
    re-ranked by interval midpoints so the state stays feasible.
    """
    t = deterministic_init_theta(data)
    if t <= data.support.lo:
        t = data.support.lo + INIT_EPS
    lo_u = np.array([gcdf(data.code, m, x - 1, t) for m, x in zip(data.m, data.x)])
    hi_u = np.array([gcdf(data.code, m, x, t) for m, x in zip(data.m, data.x)])
    u = lo_u + (hi_u - lo_u) * rng.random(data.n)
    tiny = np.finfo(float).tiny
    u = np.clip(u, tiny, np.nextafter(1.0, 0.0))
    w = rng.random(data.n)
    state = LatentState.from_uw(data, u, w)
    if not constraint_check(state):
        order = np.argsort((state.theta_lower + state.theta_upper) / 2, kind="stable")
        w_ranked = np.empty(data.n)
        w_ranked[order] = np.sort(w)
        state = LatentState(state.u, w_ranked, state.theta_lower, state.theta_upper)
    return state


def initialize(data, init, rng):
    if init == "random":
        return init_random(data, rng)
    if init == "deterministic":
        return init_deterministic(data, rng)
    raise ValueError(f"unknown init {init!r}")


def _envelopes(i, state, data):
    n = data.n
    us, wup, wlp = np.empty(2 * n), np.empty(2 * n), np.empty(2 * n)
    _decompose(i, data.code, data.m, data.x, state.w, state.theta_lower, state.theta_upper, us, wup, wlp)
    return us, wup, wlp


def rectangle_decomposition(i, state, data):
    """The ``2n - 1`` rectangles making up the feasible region for ``(u_i, w_i)``.

    Only the other observations' entries of ``state`` are read.  Rectangles
    whose height band is empty get weight 0; exact ties among the u
    breakpoints give zero-width rectangles.
    """
    us, wup, wlp = _envelopes(i, state, data)
    rects = []
    for k in range(2 * data.n - 1):
        base = us[k + 1] - us[k]
        rects.append(Rect(us[k], us[k + 1], wlp[k + 1], wup[k], base * max(0.0, wup[k] - wlp[k + 1])))
    if not sum(r.weight for r in rects) > 0:
        raise InfeasibleStateError(f"conditional feasible region has zero area for observation {i}")
    return rects


def gibbs_update_one(i, state, data, rng):
    """Redraw ``(u_i, w_i)`` from its conditional uniform distribution."""
    new = state.copy()
    r = rng.random(3)
    n = data.n
    us, wup, wlp = np.empty(2 * n), np.empty(2 * n), np.empty(2 * n)
    code = _update_one(i, data.code, data.m, data.x, new.u, new.w, new.theta_lower, new.theta_upper,
                       r[0], r[1], r[2], us, wup, wlp, _ACC.abs_tol, _ACC.rel_tol, _ACC.max_iter)
    _raise_for(code, i)
    return new


def resample_w_order(state, rng):
    """Replace ``w`` by fresh sorted uniforms placed in the same rank order."""
    new = state.copy()
    _resample_w(new.w, rng.random(state.n))
    return new


def evaluate_bounds(state, grid):
    grid = np.ascontiguousarray(grid, dtype=float)
    lower = np.empty(grid.shape[0])
    upper = np.empty(grid.shape[0])
    _bounds(state.w, state.theta_lower, state.theta_upper, grid, lower, upper)
    return BoundSample(grid, lower, upper)


# ---------------------------------------------------------------------------
# chains
# ---------------------------------------------------------------------------


def _chunks(rng, n, n_sweeps):
    done = 0
    while done < n_sweeps:
        c = min(_CHUNK, n_sweeps - done)
        yield rng.random((c, n, 3)), rng.random((c, n))
        done += c


def _drive(data, state, rng, n_sweeps, grid=None, out_lower=None, out_upper=None, thin=1,
           out_u=None, out_w=None):
    empty2 = np.empty((0, 0))
    rec_bounds = out_lower is not None
    rec_states = out_u is not None
    grid = np.empty(0) if grid is None else grid
    done = 0
    for r_upd, r_res in _chunks(rng, data.n, n_sweeps):
        code = _sweeps(data.code, data.m, data.x, state.u, state.w, state.theta_lower, state.theta_upper,
                       r_upd, r_res, grid, rec_bounds,
                       out_lower if rec_bounds else empty2, out_upper if rec_bounds else empty2,
                       thin, rec_states, out_u if rec_states else empty2, out_w if rec_states else empty2,
                       done, _ACC.abs_tol, _ACC.rel_tol, _ACC.max_iter)
        _raise_for(code)
        done += r_upd.shape[0]


def run_chain(data, cfg, state=None):
    """Run ``n_burn + n_mcmc`` sweeps and return the post-burn-in fiducial bounds.

    Fully determined by ``cfg.seed``; a supplied ``state`` replaces the
    configured initialization.
    """
    rng = make_rng(cfg.seed)
    state = initialize(data, cfg.init, rng) if state is None else state.copy()
    _drive(data, state, rng, cfg.n_burn)
    lower = np.empty((cfg.n_mcmc, cfg.grid.shape[0]))
    upper = np.empty_like(lower)
    _drive(data, state, rng, cfg.n_mcmc, cfg.grid, lower, upper)
    return FiducialSamples(cfg.grid, lower, upper)


def sample_states(data, cfg, thin=1):
    """Run a chain and keep every ``thin``-th post-burn-in ``(u, w)``.

    Returns arrays of shape ``(n_mcmc // thin, n)``.
    """
    rng = make_rng(cfg.seed)
    state = initialize(data, cfg.init, rng)
    _drive(data, state, rng, cfg.n_burn)
    rows = cfg.n_mcmc // thin
    out_u = np.empty((rows, data.n))
    out_w = np.empty((rows, data.n))
    _drive(data, state, rng, rows * thin, thin=thin, out_u=out_u, out_w=out_w)
    return out_u, out_w


def rects_at(data, cfg, i, sweep):
    """Rectangles for observation ``i`` (0-based) during sweep ``sweep`` (1-based) of a chain.

    The chain defined by ``cfg`` is replayed up to the moment observation
    ``i`` is about to be updated in that sweep.
    """
    if not 1 <= sweep <= cfg.n_burn + cfg.n_mcmc:
        raise ValueError("sweep out of range")
    if not 0 <= i < data.n:
        raise ValueError("observation index out of range")
    rng = make_rng(cfg.seed)
    state = initialize(data, cfg.init, rng)
    base = 0
    for phase in (cfg.n_burn, cfg.n_mcmc):
        for r_upd, r_res in _chunks(rng, data.n, phase):
            c = r_upd.shape[0]
            if base + c < sweep:
                _drive_fixed(data, state, r_upd, r_res)
                base += c
                continue
            s = sweep - base - 1
            _drive_fixed(data, state, r_upd[:s], r_res[:s])
            us, wup, wlp = np.empty(2 * data.n), np.empty(2 * data.n), np.empty(2 * data.n)
            for j in range(i):
                code = _update_one(j, data.code, data.m, data.x, state.u, state.w, state.theta_lower,
                                   state.theta_upper, r_upd[s, j, 0], r_upd[s, j, 1], r_upd[s, j, 2],
                                   us, wup, wlp, _ACC.abs_tol, _ACC.rel_tol, _ACC.max_iter)
                _raise_for(code, j)
            return rectangle_decomposition(i, state, data)
    raise AssertionError("unreachable")


def _drive_fixed(data, state, r_upd, r_res):
    empty2 = np.empty((0, 0))
    code = _sweeps(data.code, data.m, data.x, state.u, state.w, state.theta_lower, state.theta_upper,
                   r_upd, r_res, np.empty(0), False, empty2, empty2, 1, False, empty2, empty2, 0,
                   _ACC.abs_tol, _ACC.rel_tol, _ACC.max_iter)
    _raise_for(code)


def write_rects_csv(rects, dest=None):
    """Write rectangles as ``u_lo,u_hi,w_lo,w_hi,weight`` rows; returns the text if ``dest`` is None."""
    buf = io.StringIO() if dest is None else None
    fh = buf if dest is None else open(dest, "w", newline="")
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["u_lo", "u_hi", "w_lo", "w_hi", "weight"])
        for r in rects:
            writer.writerow([repr(float(v)) for v in (r.u_lo, r.u_hi, r.w_lo, r.w_hi, r.weight)])
    finally:
        if dest is not None:
            fh.close()
    return buf.getvalue() if dest is None else None


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainDiagnostics:
    """Per-iteration mean/variance of the mixture CDF ``(F_lower + F_upper) / 2``.

    The mixture CDF is read as a discrete law with atoms on the grid; mass
    left above the last grid point is put on the last grid point.
    ``lag1_autocorr`` is NaN when the mean trace is constant.
    """

    mean_trace: np.ndarray
    var_trace: np.ndarray
    lag1_autocorr: float


def chain_diagnostics(samples):
    fs = FiducialSamples.from_samples(samples)
    if len(fs) < 2:
        raise ValueError("chain_diagnostics needs at least 2 samples")
    mix = 0.5 * (fs.lower + fs.upper)
    mass = np.diff(mix, axis=1, prepend=0.0)
    mass[:, -1] += 1.0 - mix[:, -1]
    g = fs.grid
    mean = mass @ g
    var = mass @ (g**2) - mean**2
    var = np.maximum(var, 0.0)
    centered = mean - mean.mean()
    denom = np.dot(centered, centered)
    rho = float(np.dot(centered[:-1], centered[1:]) / denom) if denom > 0 else float("nan")
    return ChainDiagnostics(mean, var, rho)
