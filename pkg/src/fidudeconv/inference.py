"""Point estimates and pointwise confidence intervals from fiducial draws.

Quantiles use the nearest-rank convention: the ``q`` quantile of ``N`` values
is the ``ceil(q * N)``-th smallest.  The point estimate is the pooled median
of all lower and upper bound values (mean of the two central order
statistics when the count is even).
"""

import math
from dataclasses import dataclass

import numpy as np

from .gibbs import FiducialSamples

__all__ = [
    "CdfEstimate",
    "QUANTILE_CONVENTION",
    "SampleSizeError",
    "ci_conservative",
    "ci_mixture",
    "estimate_cdf",
    "isotonize",
    "min_draws",
    "nearest_rank",
    "pointwise_median",
]

QUANTILE_CONVENTION = "nearest-rank"


class SampleSizeError(ValueError):
    """Too few draws for the requested quantile."""


@dataclass(frozen=True)
class CdfEstimate:
    grid: np.ndarray
    point: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    alpha: float
    kind: str

    def at(self, t):
        """(point, lower, upper) at grid values ``t`` (must lie on the grid)."""
        idx = np.searchsorted(self.grid, t)
        if np.any(idx >= self.grid.size) or np.any(self.grid[np.minimum(idx, self.grid.size - 1)] != t):
            raise KeyError(f"{t!r} is not a grid point")
        return self.point[idx], self.ci_lower[idx], self.ci_upper[idx]


def _rank(q, count):
    # rounding guards against q*N landing a hair above an integer
    return math.ceil(round(q * count, 9))


def nearest_rank(values, q, axis=0):
    """Nearest-rank ``q`` quantile of ``values`` along ``axis``."""
    values = np.asarray(values, dtype=float)
    count = values.shape[axis]
    k = _rank(q, count)
    if not 1 <= k <= count:
        raise SampleSizeError(f"quantile {q} needs rank {k} of {count} values")
    return np.partition(values, k - 1, axis=axis).take(k - 1, axis=axis)


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")


def min_draws(alpha):
    """Smallest sample count whose nearest-rank ``alpha/2`` quantile exists."""
    _check_alpha(alpha)
    return math.ceil(round(1.0 / min(alpha / 2, 1 - alpha / 2), 9))


def _check_count(alpha, count):
    need = min_draws(alpha)
    if count < need:
        raise SampleSizeError(f"{count} draws are too few for alpha={alpha}; need at least {need}")


def pointwise_median(samples):
    fs = FiducialSamples.from_samples(samples)
    return np.median(np.concatenate([fs.lower, fs.upper], axis=0), axis=0)


def ci_conservative(samples, alpha=0.05):
    """alpha/2 quantile of the lower bounds and 1 - alpha/2 quantile of the upper bounds."""
    _check_alpha(alpha)
    fs = FiducialSamples.from_samples(samples)
    _check_count(alpha, len(fs))
    return nearest_rank(fs.lower, alpha / 2), nearest_rank(fs.upper, 1 - alpha / 2)


def ci_mixture(samples, alpha=0.05):
    """alpha/2 and 1 - alpha/2 quantiles of the pooled lower and upper bounds."""
    _check_alpha(alpha)
    fs = FiducialSamples.from_samples(samples)
    pooled = np.concatenate([fs.lower, fs.upper], axis=0)
    _check_count(alpha, pooled.shape[0])
    return nearest_rank(pooled, alpha / 2), nearest_rank(pooled, 1 - alpha / 2)


def isotonize(*arrays):
    return tuple(np.maximum.accumulate(a) for a in arrays)


def estimate_cdf(samples, alpha=0.05, kind="mixture"):
    """Median point estimate plus a ``kind`` ("mixture" or "conservative") interval."""
    fs = FiducialSamples.from_samples(samples)
    if kind == "mixture":
        lo, hi = ci_mixture(fs, alpha)
    elif kind == "conservative":
        lo, hi = ci_conservative(fs, alpha)
    else:
        raise ValueError(f"unknown interval kind {kind!r}")
    point, lo, hi = isotonize(pointwise_median(fs), lo, hi)
    return CdfEstimate(fs.grid.copy(), point, lo, hi, float(alpha), kind)
