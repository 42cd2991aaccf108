"""Latent binary state inference from repeated noisy ratings."""

from ._version import __version__
from .analysis import (
    FitReport,
    RecoveryMetrics,
    ate_posterior,
    auc,
    pearson_corr,
    per_call_posterior,
    posterior_prob_dissatisfied,
)
from .baselines import (
    MajorityVoteResult,
    logistic_fit,
    majority_vote,
    majority_vote_analysis,
    naive_single_rating_fit,
    vote_error_rates,
)
from .data import CallRecord, DatasetError, RatingDataset, truncate_ratings
from .diagnostics import Diagnostics, ess_bulk, split_rhat
from .fitting import FitResult, fit
from .hmc import PosteriorDraws, SamplerConfig, sample
from .model import (
    BaseParams,
    ConfigurationError,
    ExtParams,
    Posterior,
    PriorConfig,
    UnconstrainedVector,
    constrain,
    error_rates,
    grad_log_posterior,
    log_binom_component,
    log_lik_call,
    log_posterior,
    log_prior,
    theta_c,
    unconstrain,
)
from .simulate import SimConfig, SimTruth, simulate, true_ate

__all__ = [
    "BaseParams",
    "CallRecord",
    "ConfigurationError",
    "DatasetError",
    "Diagnostics",
    "ExtParams",
    "FitReport",
    "FitResult",
    "MajorityVoteResult",
    "Posterior",
    "PosteriorDraws",
    "PriorConfig",
    "RatingDataset",
    "RecoveryMetrics",
    "SamplerConfig",
    "SimConfig",
    "SimTruth",
    "UnconstrainedVector",
    "ate_posterior",
    "auc",
    "constrain",
    "error_rates",
    "ess_bulk",
    "fit",
    "grad_log_posterior",
    "log_binom_component",
    "log_lik_call",
    "log_posterior",
    "log_prior",
    "logistic_fit",
    "majority_vote",
    "majority_vote_analysis",
    "naive_single_rating_fit",
    "pearson_corr",
    "per_call_posterior",
    "posterior_prob_dissatisfied",
    "sample",
    "simulate",
    "split_rhat",
    "theta_c",
    "true_ate",
    "truncate_ratings",
    "unconstrain",
    "vote_error_rates",
]
