"""Cellwise-robust multi-group Gaussian mixture modeling."""

from ._core import (
    FactorizationError,
    FitResult,
    Simulation,
    ValidationError,
    alpha_sweep,
    chi2_quantile,
    classify,
    condition_number,
    conditional_moments,
    fit,
    flag_scores,
    kl_divergence,
    kl_mean,
    mse_mu,
    mse_pi,
    observed_log_density,
    random_covariance,
    residuals,
    simulate,
    univariate_mcd,
)

__all__ = [
    "FactorizationError",
    "FitResult",
    "Simulation",
    "ValidationError",
    "alpha_sweep",
    "chi2_quantile",
    "classify",
    "condition_number",
    "conditional_moments",
    "fit",
    "flag_scores",
    "kl_divergence",
    "kl_mean",
    "mse_mu",
    "mse_pi",
    "observed_log_density",
    "random_covariance",
    "residuals",
    "simulate",
    "univariate_mcd",
]

__version__ = "0.1.0"
