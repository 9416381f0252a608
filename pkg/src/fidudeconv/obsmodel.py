"""Binomial and Poisson sampling mechanisms and their set-inverse endpoints.

For a discrete observation ``x`` with parameter ``theta`` the sampling CDF is
``G(x, theta) = P(X <= x | theta)``, nonincreasing in ``theta``.  Its
set-inverse ``G*(x, u) = sup{theta : G(x, theta) >= u}`` gives the interval
``(G*(x - 1, u), G*(x, u)]`` of parameters that map ``u`` to ``x``.

* binomial: ``G(x, p) = 1 - I_p(x + 1, m - x)`` and ``G*(x, u)`` is the
  ``1 - u`` quantile of Beta(x + 1, m - x);
* Poisson: ``G(x, lam) = 1 - P(x + 1, lam)`` and ``G*(x, u)`` is the ``1 - u``
  quantile of Gamma(x + 1, 1).
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .specfun import DEFAULT_ACCURACY, ConvergenceError, ibeta, ibeta_inv, igamma, igamma_inv

__all__ = [
    "BINOMIAL",
    "POISSON",
    "POISSON_UPPER",
    "Dataset",
    "Observation",
    "SupportInterval",
    "deterministic_init_theta",
    "g_star_lower",
    "g_star_upper",
    "interval_endpoints",
    "model_cdf",
    "model_inverse",
    "support",
]

BINOMIAL = 0
POISSON = 1
_MODEL_CODES = {"binomial": BINOMIAL, "poisson": POISSON}

# finite stand-in for +inf at the top of the Poisson support; only compared
POISSON_UPPER = 1e300


@dataclass(frozen=True)
class SupportInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("support requires lo < hi")

    def __contains__(self, theta):
        return self.lo <= theta <= self.hi


def support(model):
    if model == "binomial":
        return SupportInterval(0.0, 1.0)
    if model == "poisson":
        return SupportInterval(0.0, POISSON_UPPER)
    raise ValueError(f"unknown model {model!r}")


@dataclass(frozen=True)
class Observation:
    """One count.  ``m`` is the binomial trial count; ``None`` means Poisson."""

    x: int
    m: int | None = None

    def __post_init__(self):
        if int(self.x) != self.x or self.x < 0:
            raise ValueError(f"x must be a nonnegative integer, got {self.x!r}")
        if self.m is not None:
            if int(self.m) != self.m or self.m < 1:
                raise ValueError(f"m must be a positive integer, got {self.m!r}")
            if self.x > self.m:
                raise ValueError(f"x={self.x} exceeds m={self.m}")

    @property
    def model(self):
        return "poisson" if self.m is None else "binomial"


@dataclass(frozen=True)
class Dataset:
    """An ordered, homogeneous collection of observations."""

    model: str
    observations: tuple
    x: np.ndarray = field(init=False, repr=False, compare=False)
    m: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.model not in _MODEL_CODES:
            raise ValueError(f"unknown model {self.model!r}")
        obs = tuple(self.observations)
        if len(obs) < 1:
            raise ValueError("a dataset needs at least one observation")
        for k, o in enumerate(obs):
            if o.model != self.model:
                raise ValueError(f"observation {k} is {o.model}, dataset is {self.model}")
        object.__setattr__(self, "observations", obs)
        x = np.array([o.x for o in obs], dtype=np.int64)
        m = np.array([0 if o.m is None else o.m for o in obs], dtype=np.int64)
        x.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "m", m)

    @classmethod
    def binomial(cls, x, m):
        x, m = np.broadcast_arrays(np.asarray(x), np.asarray(m))
        return cls("binomial", tuple(Observation(int(a), int(b)) for a, b in zip(x, m)))

    @classmethod
    def poisson(cls, x):
        return cls("poisson", tuple(Observation(int(a)) for a in np.atleast_1d(x)))

    @property
    def n(self):
        return len(self.observations)

    @property
    def code(self):
        return _MODEL_CODES[self.model]

    @property
    def support(self):
        return support(self.model)

    def __len__(self):
        return self.n


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


# below this many trials the binomial CDF is summed directly; the binomial
# coefficients stay exact in double precision
_DIRECT_M = 50


@njit(cache=True)
def _binom_cdf_direct(m, x, theta):
    q = 1.0 - theta
    c = 1.0
    total = 0.0
    for k in range(x + 1):
        total += c * theta**k * q ** (m - k)
        c = c * (m - k) / (k + 1)
    return min(total, 1.0)


@njit(cache=True)
def gcdf(model, m, x, theta):
    """G(x, theta) = P(X <= x | theta)."""
    if x < 0:
        return 0.0
    if model == BINOMIAL:
        if x >= m:
            return 1.0
        if m <= _DIRECT_M:
            return _binom_cdf_direct(m, x, theta)
        return 1.0 - ibeta(theta, x + 1.0, float(m - x))
    return 1.0 - igamma(theta, x + 1.0)


@njit(cache=True)
def gstar(model, m, x, u, abs_tol, rel_tol, max_iter):
    """G*(x, u) = sup{theta : G(x, theta) >= u}, with exact support edges."""
    if x < 0:
        return 0.0
    if model == BINOMIAL:
        if x >= m:
            return 1.0
        t = ibeta_inv(1.0 - u, x + 1.0, float(m - x), abs_tol, rel_tol, max_iter)
        top = 1.0
    else:
        t = igamma_inv(1.0 - u, x + 1.0, abs_tol, rel_tol, max_iter)
        top = POISSON_UPPER
    if np.isnan(t):
        return t
    # refine so that G(x, t) >= u > G(x, next(t)) holds for the floating-point
    # G itself; keeps model_inverse and G* exactly consistent
    step = 4.0 * np.spacing(max(t, 1e-300))
    if gcdf(model, m, x, t) >= u:
        lo = t
        while True:
            hi = min(lo + step, top)
            if gcdf(model, m, x, hi) < u:
                break
            if hi == top:
                return top
            lo = hi
            step *= 2.0
    else:
        hi = t
        while True:
            lo = max(hi - step, 0.0)
            if lo == 0.0 or gcdf(model, m, x, lo) >= u:
                break
            hi = lo
            step *= 2.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return lo
        if gcdf(model, m, x, mid) >= u:
            lo = mid
        else:
            hi = mid


@njit(cache=True)
def endpoints_kernel(model, m, x, u, abs_tol, rel_tol, max_iter, lower, upper):
    for k in range(u.shape[0]):
        lower[k] = gstar(model, m[k], x[k] - 1, u[k], abs_tol, rel_tol, max_iter)
        upper[k] = gstar(model, m[k], x[k], u[k], abs_tol, rel_tol, max_iter)


@njit(cache=True)
def _gcdf_array(model, m, x, theta, out):
    for k in range(out.shape[0]):
        out[k] = gcdf(model, m[k], x[k], theta[k])


@njit(cache=True)
def _gstar_array(model, m, x, u, abs_tol, rel_tol, max_iter, out):
    for k in range(out.shape[0]):
        out[k] = gstar(model, m[k], x[k], u[k], abs_tol, rel_tol, max_iter)


@njit(cache=True)
def _inverse_array(model, m, u, theta, out):
    for k in range(out.shape[0]):
        x = 0
        while gcdf(model, m[k], x, theta[k]) < u[k]:
            x += 1
            if model == BINOMIAL and x >= m[k]:
                break
        out[k] = x


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def _code(obs):
    return _MODEL_CODES[obs.model]


def _broadcast(*args, dtypes):
    arrs = np.broadcast_arrays(*(np.asarray(a) for a in args))
    shape = arrs[0].shape
    flat = [np.ascontiguousarray(a, dtype=dt).ravel() for a, dt in zip(arrs, dtypes)]
    return shape, flat


def _finish(out, shape):
    out = out.reshape(shape)
    return out.item() if out.ndim == 0 else out


def _check_theta(obs, theta):
    s = support(obs.model)
    th = np.asarray(theta, dtype=float)
    if np.any(~((th >= s.lo) & (th <= s.hi))):
        raise ValueError(f"theta outside the {obs.model} support [{s.lo}, {s.hi}]")


def _check_u(u):
    uu = np.asarray(u, dtype=float)
    if np.any(~((uu > 0) & (uu < 1))):
        raise ValueError("u must lie strictly inside (0, 1)")


def model_cdf(obs, x, theta):
    """P(X <= x) for the observation's family at parameter ``theta``."""
    _check_theta(obs, theta)
    m = obs.m or 0
    shape, (xx, th) = _broadcast(x, theta, dtypes=(np.int64, float))
    out = np.empty(th.shape[0])
    _gcdf_array(_code(obs), np.full(th.shape[0], m, dtype=np.int64), xx, th, out)
    return _finish(out, shape)


def _gstar_public(obs, x_shift, u, accuracy):
    _check_u(u)
    shape, (uu,) = _broadcast(u, dtypes=(float,))
    k = uu.shape[0]
    out = np.empty(k)
    _gstar_array(
        _code(obs),
        np.full(k, obs.m or 0, dtype=np.int64),
        np.full(k, obs.x + x_shift, dtype=np.int64),
        uu,
        accuracy.abs_tol,
        accuracy.rel_tol,
        accuracy.max_iter,
        out,
    )
    if np.any(np.isnan(out)):
        raise ConvergenceError("endpoint inversion did not converge")
    return _finish(out, shape)


def g_star_upper(obs, u, accuracy=DEFAULT_ACCURACY):
    """Upper endpoint G*(x, u) of the parameter interval for ``obs``."""
    return _gstar_public(obs, 0, u, accuracy)


def g_star_lower(obs, u, accuracy=DEFAULT_ACCURACY):
    """Lower endpoint G*(x - 1, u); exactly 0 when x == 0."""
    return _gstar_public(obs, -1, u, accuracy)


def model_inverse(obs, u, theta):
    """inf{x : G(x, theta) >= u}.  Only ``obs.m`` (or its absence) is used."""
    _check_u(u)
    _check_theta(obs, theta)
    shape, (uu, th) = _broadcast(u, theta, dtypes=(float, float))
    out = np.empty(uu.shape[0], dtype=np.int64)
    _inverse_array(_code(obs), np.full(uu.shape[0], obs.m or 0, dtype=np.int64), uu, th, out)
    return _finish(out, shape)


def interval_endpoints(data, u, accuracy=DEFAULT_ACCURACY):
    """Vectors (theta_lower, theta_upper) for every observation of ``data``.

    ``u`` has shape ``(n,)`` or ``(k, n)``; the result has the same shape.
    """
    u = np.asarray(u, dtype=float)
    shape = u.shape
    flat = np.ascontiguousarray(u).reshape(-1)
    reps = flat.shape[0] // data.n
    m = np.tile(data.m, reps)
    x = np.tile(data.x, reps)
    lower = np.empty_like(flat)
    upper = np.empty_like(flat)
    endpoints_kernel(data.code, m, x, flat, accuracy.abs_tol, accuracy.rel_tol, accuracy.max_iter, lower, upper)
    if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
        raise ConvergenceError("endpoint inversion did not converge")
    return lower.reshape(shape), upper.reshape(shape)


def deterministic_init_theta(data):
    """Pooled estimate of a common parameter: sum(x)/sum(m) or mean(x)."""
    if data.model == "binomial":
        return float(data.x.sum() / data.m.sum())
    return float(data.x.sum() / data.n)
