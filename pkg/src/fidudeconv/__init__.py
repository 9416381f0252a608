"""Generalized fiducial inference for discrete nonparametric deconvolution.

Given counts ``X_i`` drawn as binomial or Poisson with latent parameters
``Theta_i ~ F``, the package samples fiducial lower/upper bounds for the
unknown distribution function ``F`` with a Gibbs sampler and turns them into
point estimates and pointwise confidence intervals.
"""

__version__ = "0.1.0"

from .gibbs import FiducialSamples, GibbsConfig, LatentState, chain_diagnostics, run_chain
from .inference import CdfEstimate, ci_conservative, ci_mixture, estimate_cdf, pointwise_median
from .obsmodel import Dataset, Observation, g_star_lower, g_star_upper, interval_endpoints, model_cdf, model_inverse
from .specfun import AccuracySpec, ConvergenceError, reg_inc_beta, reg_inc_beta_inv, reg_inc_gamma, reg_inc_gamma_inv

__all__ = [
    "AccuracySpec",
    "CdfEstimate",
    "ConvergenceError",
    "Dataset",
    "FiducialSamples",
    "GibbsConfig",
    "LatentState",
    "Observation",
    "chain_diagnostics",
    "ci_conservative",
    "ci_mixture",
    "estimate_cdf",
    "g_star_lower",
    "g_star_upper",
    "interval_endpoints",
    "model_cdf",
    "model_inverse",
    "pointwise_median",
    "reg_inc_beta",
    "reg_inc_beta_inv",
    "reg_inc_gamma",
    "reg_inc_gamma_inv",
    "run_chain",
]
