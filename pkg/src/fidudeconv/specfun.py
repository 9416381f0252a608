"""Regularized incomplete beta/gamma functions and their inverses.

The scalar kernels are numba-compiled so the Gibbs sampler can call them from
its inner loop.  The public wrappers accept scalars or arrays, validate the
domain and turn kernel failures (NaN sentinels) into exceptions.

Degenerate shape parameters are supported as point masses:

* ``a == 0`` -- Beta(0, b) is a point mass at 0,
* ``b == 0`` -- Beta(a, 0) is a point mass at 1,
* ``s == 0`` -- Gamma(0, 1) is a point mass at 0.
"""

from dataclasses import dataclass
from math import exp, inf, isnan, lgamma, log, log1p, nan, pi, sqrt

import numpy as np
from numba import njit, vectorize

__all__ = [
    "AccuracySpec",
    "ConvergenceError",
    "DEFAULT_ACCURACY",
    "log_gamma",
    "reg_inc_beta",
    "reg_inc_beta_inv",
    "reg_inc_gamma",
    "reg_inc_gamma_inv",
]

_EPS = 2.220446049250313e-16
_FPMIN = 1e-300
_CF_MAXIT = 100_000
_HALF_LOG_2PI = 0.5 * log(2.0 * pi)


class ConvergenceError(ArithmeticError):
    """An iterative special-function routine failed to converge."""


@dataclass(frozen=True)
class AccuracySpec:
    """Stopping rule for the quantile inversions.

    Iteration stops once the update is below ``rel_tol`` times the distance to
    the nearer support edge, or once the residual ``|F(x) - q|`` is below
    ``abs_tol * min(q, 1 - q)``.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")


DEFAULT_ACCURACY = AccuracySpec()


# ---------------------------------------------------------------------------
# scalar kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _stirling_corr(x):
    # lgamma(x) - [(x - 1/2) ln x - x + ln(2 pi)/2], valid for x >= 10
    r = 1.0 / x
    r2 = r * r
    return r * (
        1.0 / 12.0
        - r2
        * (
            1.0 / 360.0
            - r2
            * (
                1.0 / 1260.0
                - r2 * (1.0 / 1680.0 - r2 * (1.0 / 1188.0 - r2 * (691.0 / 360360.0 - r2 / 156.0)))
            )
        )
    )


@njit(cache=True)
def _log_beta_front(x, a, b):
    """log of x**a * (1-x)**b / B(a, b), stable for large a and b."""
    if a >= 10.0 and b >= 10.0:
        s = a + b
        t = x * s - a
        e = a * log1p(t / a) + b * log1p(-t / b)
        corr = _stirling_corr(a) + _stirling_corr(b) - _stirling_corr(s)
        return e + 0.5 * log(a * b / s) - _HALF_LOG_2PI - corr
    return a * log(x) + b * log1p(-x) - (lgamma(a) + lgamma(b) - lgamma(a + b))


@njit(cache=True)
def _beta_cf(x, a, b):
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2.0 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        de = d * c
        h *= de
        if abs(de - 1.0) < _EPS:
            return h
    return nan


@njit(cache=True)
def ibeta(x, a, b):
    """I_x(a, b) with point-mass conventions for a == 0 or b == 0."""
    if a == 0.0:
        return 1.0
    if b == 0.0:
        return 1.0 if x >= 1.0 else 0.0
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = exp(_log_beta_front(x, a, b))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(x, a, b) / a
    return 1.0 - front * _beta_cf(1.0 - x, b, a) / b


@njit(cache=True)
def ibeta_inv(q, a, b, abs_tol, rel_tol, max_iter):
    """Smallest x with I_x(a, b) >= q; NaN when max_iter is exhausted."""
    if a == 0.0:
        return 0.0
    if b == 0.0:
        return 1.0 if q > 0.0 else 0.0
    if q <= 0.0:
        return 0.0
    if q >= 1.0:
        return 1.0
    lo = 0.0
    hi = 1.0
    x = a / (a + b)
    qtol = abs_tol * min(q, 1.0 - q)
    for _ in range(max_iter):
        f = ibeta(x, a, b) - q
        if isnan(f):
            return nan
        if f == 0.0 or abs(f) <= qtol:
            return x
        if f < 0.0:
            lo = x
        else:
            hi = x
        pdf = exp(_log_beta_front(x, a, b)) / (x * (1.0 - x))
        xn = x - f / pdf if pdf > 0.0 else nan
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        step = abs(xn - x)
        x = xn
        if step <= rel_tol * min(x, 1.0 - x) or hi - lo <= 2.0 * _EPS * x:
            return x
    return nan


@njit(cache=True)
def _log_gamma_front(x, s):
    """log of x**s * exp(-x) / Gamma(s)."""
    if s >= 10.0:
        t = x - s
        return s * log1p(t / s) - t + 0.5 * log(s) - _HALF_LOG_2PI - _stirling_corr(s)
    return s * log(x) - x - lgamma(s)


@njit(cache=True)
def igamma(x, s):
    """Lower regularized incomplete gamma P(s, x); s == 0 is a point mass at 0."""
    if s == 0.0:
        return 1.0
    if x <= 0.0:
        return 0.0
    if x == inf:
        return 1.0
    front = exp(_log_gamma_front(x, s))
    if x < s + 1.0:
        ap = s
        term = 1.0 / s
        total = term
        for _ in range(_CF_MAXIT):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _EPS:
                return total * front
        return nan
    bb = x + 1.0 - s
    c = 1.0 / _FPMIN
    d = 1.0 / bb
    h = d
    for i in range(1, _CF_MAXIT + 1):
        an = -i * (i - s)
        bb += 2.0
        d = an * d + bb
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = bb + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        de = d * c
        h *= de
        if abs(de - 1.0) < _EPS:
            return 1.0 - front * h
    return nan


@njit(cache=True)
def igamma_inv(q, s, abs_tol, rel_tol, max_iter):
    """Smallest x with P(s, x) >= q; inf for q == 1, NaN on failure."""
    if s == 0.0 or q <= 0.0:
        return 0.0
    if q >= 1.0:
        return inf
    lo = 0.0
    hi = s + 10.0 * sqrt(s) + 10.0
    for _ in range(2000):
        if igamma(hi, s) >= q:
            break
        lo = hi
        hi *= 2.0
    x = s if lo < s < hi else 0.5 * (lo + hi)
    qtol = abs_tol * min(q, 1.0 - q)
    for _ in range(max_iter):
        f = igamma(x, s) - q
        if isnan(f):
            return nan
        if f == 0.0 or abs(f) <= qtol:
            return x
        if f < 0.0:
            lo = x
        else:
            hi = x
        pdf = exp(_log_gamma_front(x, s)) / x
        xn = x - f / pdf if pdf > 0.0 else nan
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        step = abs(xn - x)
        x = xn
        if step <= rel_tol * x or hi - lo <= 2.0 * _EPS * x:
            return x
    return nan


# ---------------------------------------------------------------------------
# elementwise ufuncs
# ---------------------------------------------------------------------------


@vectorize(["f8(f8, f8, f8)"], cache=True)
def _ibeta_ufunc(x, a, b):
    return ibeta(x, a, b)


@vectorize(["f8(f8, f8, f8, f8, f8, i8)"], cache=True)
def _ibeta_inv_ufunc(q, a, b, abs_tol, rel_tol, max_iter):
    return ibeta_inv(q, a, b, abs_tol, rel_tol, max_iter)


@vectorize(["f8(f8, f8)"], cache=True)
def _igamma_ufunc(x, s):
    return igamma(x, s)


@vectorize(["f8(f8, f8, f8, f8, i8)"], cache=True)
def _igamma_inv_ufunc(q, s, abs_tol, rel_tol, max_iter):
    return igamma_inv(q, s, abs_tol, rel_tol, max_iter)


def _scalarize(out):
    if isinstance(out, np.ndarray) and out.ndim == 0:
        return float(out)
    return out


def _check_converged(out, what):
    if np.any(np.isnan(out)):
        raise ConvergenceError(f"{what} did not converge")
    return _scalarize(out)


def log_gamma(a):
    """Natural log of the gamma function for positive ``a``."""
    arr = np.asarray(a, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("log_gamma requires a > 0")
    if arr.ndim == 0:
        return lgamma(float(arr))
    return np.vectorize(lgamma, otypes=[float])(arr)


def reg_inc_beta(p, a, b):
    """Regularized incomplete beta function I_p(a, b), i.e. the Beta(a, b) CDF at p.

    Parameters
    ----------
    p : float or array_like
        Evaluation point(s) in [0, 1].
    a, b : float or array_like
        Nonnegative shape parameters, not both zero.  ``a == 0`` is a point
        mass at 0 and ``b == 0`` a point mass at 1.

    Returns
    -------
    float or ndarray
    """
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    if np.any(~((p >= 0) & (p <= 1))):
        raise ValueError("p must lie in [0, 1]")
    _check_shapes(a, b)
    return _check_converged(_ibeta_ufunc(p, a, b), "reg_inc_beta")


def reg_inc_beta_inv(q, a, b, accuracy=DEFAULT_ACCURACY):
    """Quantile of Beta(a, b): the smallest p with I_p(a, b) >= q."""
    q, a, b = (np.asarray(v, dtype=float) for v in (q, a, b))
    if np.any(~((q >= 0) & (q <= 1))):
        raise ValueError("q must lie in [0, 1]")
    _check_shapes(a, b)
    out = _ibeta_inv_ufunc(q, a, b, accuracy.abs_tol, accuracy.rel_tol, accuracy.max_iter)
    return _check_converged(out, "reg_inc_beta_inv")


def _check_shapes(a, b):
    if np.any(~(a >= 0)) or np.any(~(b >= 0)):
        raise ValueError("shape parameters must be nonnegative")
    if np.any((a == 0) & (b == 0)):
        raise ValueError("a and b cannot both be zero")


def reg_inc_gamma(x, s):
    """Lower regularized incomplete gamma P(s, x), the Gamma(s, 1) CDF at x."""
    x, s = np.asarray(x, dtype=float), np.asarray(s, dtype=float)
    if np.any(~(x >= 0)) or np.any(~(s >= 0)):
        raise ValueError("reg_inc_gamma requires x >= 0 and s >= 0")
    return _check_converged(_igamma_ufunc(x, s), "reg_inc_gamma")


def reg_inc_gamma_inv(q, s, accuracy=DEFAULT_ACCURACY):
    """Quantile of Gamma(s, 1).  ``q == 1`` returns ``inf``."""
    q, s = np.asarray(q, dtype=float), np.asarray(s, dtype=float)
    if np.any(~((q >= 0) & (q <= 1))):
        raise ValueError("q must lie in [0, 1]")
    if np.any(~(s >= 0)):
        raise ValueError("s must be nonnegative")
    out = _igamma_inv_ufunc(q, s, accuracy.abs_tol, accuracy.rel_tol, accuracy.max_iter)
    return _check_converged(out, "reg_inc_gamma_inv")
