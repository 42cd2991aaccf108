"""End-to-end model fitting: posterior construction, sampling, diagnostics,
and report assembly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace

import numpy as np

from ._version import __version__ as _pkg_version
from .analysis import (
    EstimandError,
    FitReport,
    ate_posterior,
    per_call_posterior,
    summarize_params,
)
from .data import RatingDataset
from .diagnostics import Diagnostics, diagnose
from .hmc import DA_GAMMA, DA_KAPPA, DA_T0, PosteriorDraws, SamplerConfig, sample
from .model import ModelKind, Posterior, PriorConfig


@dataclass
class FitResult:
    """Everything produced by one model fit."""

    report: FitReport
    draws: PosteriorDraws
    param_names: list[str]
    diagnostics: Diagnostics
    dataset: RatingDataset


def _with_difficulty_covariate(dataset: RatingDataset) -> RatingDataset:
    records = tuple(
        replace(r, covariates=r.covariates + (r.difficulty,)) for r in dataset.records
    )
    return RatingDataset(
        records=records,
        covariate_names=dataset.covariate_names + ("difficulty",),
        has_difficulty=dataset.has_difficulty,
    )


def _standardize(dataset: RatingDataset) -> tuple[RatingDataset, dict]:
    X = np.array([r.covariates for r in dataset.records], dtype=float).reshape(
        len(dataset), -1
    )
    stats = {}
    for j, name in enumerate(dataset.covariate_names):
        mean = float(X[:, j].mean())
        sd = float(X[:, j].std(ddof=0))
        if sd == 0.0:
            sd = 1.0
        X[:, j] = (X[:, j] - mean) / sd
        stats[name] = {"mean": mean, "sd": sd}
    records = tuple(
        replace(r, covariates=tuple(float(v) for v in X[i]))
        for i, r in enumerate(dataset.records)
    )
    return (
        RatingDataset(records, dataset.covariate_names, dataset.has_difficulty),
        stats,
    )


def config_digest(obj) -> str:
    """Stable hash of a (nested) configuration object."""
    payload = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(payload).hexdigest()


def fit(
    dataset: RatingDataset,
    kind: ModelKind = "base",
    priors: PriorConfig | None = None,
    sampler_config: SamplerConfig | None = None,
    plugin_posterior: bool = False,
    difficulty_as_covariate: bool = False,
    standardize: bool = False,
) -> FitResult:
    """Fit the latent-state model by HMC and assemble a full report.

    ``difficulty_as_covariate`` adds the difficulty score as an extra column
    of the state regression (off by default). ``standardize`` rescales the
    covariates to zero mean / unit variance, with the location and scale
    recorded in the manifest.
    """
    priors = priors or PriorConfig()
    sampler_config = sampler_config or SamplerConfig()

    fit_data = dataset
    standardize_stats: dict = {}
    if difficulty_as_covariate:
        if not dataset.has_difficulty:
            raise ValueError("dataset has no difficulty column to use as covariate")
        fit_data = _with_difficulty_covariate(fit_data)
    if standardize:
        fit_data, standardize_stats = _standardize(fit_data)

    posterior = Posterior(fit_data, priors, kind)
    draws = sample(
        posterior.value_and_grad,
        posterior.dim,
        sampler_config,
        constrain_fn=posterior.constrain_array,
    )
    diagnostics = diagnose(draws.draws)

    names = posterior.param_names
    summaries = summarize_params(draws, names)
    per_call = per_call_posterior(draws, fit_data, kind=kind, plugin=plugin_posterior)
    try:
        ate = ate_posterior(draws, fit_data)
    except EstimandError:
        ate = None

    manifest = {
        "model_kind": kind,
        "seed": sampler_config.seed,
        "sampler": asdict(sampler_config),
        "dual_averaging": {"gamma": DA_GAMMA, "t0": DA_T0, "kappa": DA_KAPPA},
        "priors": asdict(priors),
        "prior_digest": config_digest(asdict(priors)),
        "dataset_digest": dataset.digest(),
        "n_calls": len(dataset),
        "plugin_posterior": plugin_posterior,
        "difficulty_as_covariate": difficulty_as_covariate,
        "standardize": standardize_stats if standardize else None,
        "version": _pkg_version,
        "divergence_fraction": draws.divergence_fraction,
        "accept_rate": [float(a) for a in draws.accept_rate],
    }
    report = FitReport(
        model_kind=kind,
        param_summaries=summaries,
        per_call=per_call,
        ate=ate,
        diagnostics=diagnostics,
        manifest=manifest,
    )
    return FitResult(
        report=report,
        draws=draws,
        param_names=names,
        diagnostics=diagnostics,
        dataset=fit_data,
    )
