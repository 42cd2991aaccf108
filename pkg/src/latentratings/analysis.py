"""Posterior summaries: per-call state probabilities, treatment effects,
parameter tables, and latent-state recovery metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln
from scipy.stats import rankdata

from .data import CallRecord, RatingDataset
from .diagnostics import Diagnostics
from .hmc import PosteriorDraws
from .model import (
    ConfigurationError,
    ModelKind,
    Params,
    _call_rates,
    log_binom_component,
    theta_c,
)


class UndefinedStatisticError(ValueError):
    """Statistic undefined for the given input (constant vector, one class)."""


class EstimandError(ValueError):
    """Causal estimand undefined for the given data."""


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    sd: float
    q2_5: float
    median: float
    q97_5: float

    @classmethod
    def from_draws(cls, x: np.ndarray) -> "SummaryStats":
        x = np.asarray(x, dtype=float)
        lo, med, hi = np.percentile(x, [2.5, 50.0, 97.5])
        sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
        return cls(float(x.mean()), sd, float(lo), float(med), float(hi))

    @classmethod
    def degenerate(cls, value: float) -> "SummaryStats":
        return cls(value, 0.0, value, value, value)


@dataclass(frozen=True)
class PerCallPosterior:
    """Posterior mean and central 95% interval of P(state=1) per call."""

    call_ids: tuple[str, ...]
    mean: np.ndarray
    lo95: np.ndarray
    hi95: np.ndarray


@dataclass(frozen=True)
class FitReport:
    model_kind: ModelKind
    param_summaries: dict[str, SummaryStats]
    per_call: PerCallPosterior
    ate: SummaryStats | None
    diagnostics: Diagnostics
    manifest: dict


@dataclass(frozen=True)
class RecoveryMetrics:
    corr_with_truth: float
    auc: float


def posterior_prob_dissatisfied(params: Params, record: CallRecord) -> float:
    """Posterior probability of the positive latent state for one call.

    Bayes' rule on the two binomial branches, evaluated in log space.
    """
    th = theta_c(params, record)
    if th <= 0.0:
        return 0.0
    if th >= 1.0:
        return 1.0
    fpr, fnr = _call_rates(params, record)
    k, n = record.k_positive, record.n_ratings
    la = math.log1p(-th) + log_binom_component(k, n, fpr)
    lb = math.log(th) + log_binom_component(k, n, 1.0 - fnr)
    return float(np.exp(lb - np.logaddexp(la, lb)))


def _infer_kind(dim: int, n_covariates: int) -> ModelKind:
    if dim == n_covariates + 4:
        return "base"
    if dim == n_covariates + 6:
        return "extended"
    raise ConfigurationError(
        f"draw dimension {dim} does not match a model with {n_covariates} covariates"
    )


def _design(data: RatingDataset):
    X = np.array([r.covariates for r in data.records], dtype=float).reshape(len(data), -1)
    T = np.array([r.treatment for r in data.records], dtype=float)
    k = np.array([r.k_positive for r in data.records], dtype=float)
    n = np.array([r.n_ratings for r in data.records], dtype=float)
    H = (
        np.array([r.difficulty for r in data.records], dtype=float)
        if data.has_difficulty
        else None
    )
    return X, T, k, n, H


def _log_sigmoid_mat(x: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -x)


def _w1_chunk(chunk: np.ndarray, kind: ModelKind, p: int, X, T, k, n, H, log_choose):
    """P(state=1 | data, params) for a chunk of draws; shape (chunk, n_calls)."""
    intercept = chunk[:, 0:1]
    betas = chunk[:, 1 : 1 + p]
    tau = chunk[:, 1 + p : 2 + p]
    z = intercept + betas @ X.T + tau * T[None, :]
    log_th = _log_sigmoid_mat(z)
    log_1mth = _log_sigmoid_mat(-z)
    if kind == "base":
        fpr = chunk[:, p + 2 : p + 3]
        fnr = chunk[:, p + 3 : p + 4]
        log_f0 = log_choose[None, :] + k[None, :] * np.log(fpr) + (n - k)[None, :] * np.log1p(-fpr)
        log_f1 = log_choose[None, :] + k[None, :] * np.log1p(-fnr) + (n - k)[None, :] * np.log(fnr)
    else:
        a0 = chunk[:, p + 2 : p + 3] + chunk[:, p + 4 : p + 5] * H[None, :]
        a1 = chunk[:, p + 3 : p + 4] + chunk[:, p + 5 : p + 6] * H[None, :]
        s0 = 1.0 / (1.0 + np.exp(-a0))
        s1 = 1.0 / (1.0 + np.exp(-a1))
        log_f0 = (
            log_choose[None, :]
            + k[None, :] * (math.log(0.5) + _log_sigmoid_mat(a0))
            + (n - k)[None, :] * np.log1p(-0.5 * s0)
        )
        log_f1 = (
            log_choose[None, :]
            + k[None, :] * np.log1p(-0.5 * s1)
            + (n - k)[None, :] * (math.log(0.5) + _log_sigmoid_mat(a1))
        )
    la = log_1mth + log_f0
    lb = log_th + log_f1
    return np.exp(lb - np.logaddexp(la, lb))


def per_call_posterior(
    draws: PosteriorDraws,
    data: RatingDataset,
    kind: ModelKind | None = None,
    plugin: bool = False,
    chunk_size: int = 256,
) -> PerCallPosterior:
    """Per-call posterior state probabilities averaged over parameter draws.

    With ``plugin`` the probabilities are evaluated once at the posterior
    mean of the constrained parameters (degenerate intervals).
    """
    kind = kind or _infer_kind(draws.dim, data.n_covariates)
    X, T, k, n, H = _design(data)
    if kind == "extended" and H is None:
        raise ConfigurationError("extended model requires difficulty values")
    log_choose = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    flat = draws.flat(constrained=True)
    p = data.n_covariates
    call_ids = tuple(r.call_id for r in data.records)

    if plugin:
        point = flat.mean(axis=0, keepdims=True)
        w = _w1_chunk(point, kind, p, X, T, k, n, H, log_choose)[0]
        return PerCallPosterior(call_ids, w.copy(), w.copy(), w.copy())

    w1 = np.empty((flat.shape[0], len(data)))
    for start in range(0, flat.shape[0], chunk_size):
        chunk = flat[start : start + chunk_size]
        w1[start : start + chunk.shape[0]] = _w1_chunk(
            chunk, kind, p, X, T, k, n, H, log_choose
        )
    lo, hi = np.percentile(w1, [2.5, 97.5], axis=0)
    return PerCallPosterior(call_ids, w1.mean(axis=0), lo, hi)


def ate_draws(draws: PosteriorDraws, data: RatingDataset, chunk_size: int = 256) -> np.ndarray:
    """Per-draw average treatment effect on the probability scale.

    For every draw, predicted state probabilities are averaged over all calls
    with treatment forced on and forced off; the difference is that draw's
    effect (g-computation over the realized covariate sample).
    """
    T = np.array([r.treatment for r in data.records], dtype=float)
    if len(set(T.tolist())) < 2:
        raise EstimandError("treatment does not vary; treatment effect undefined")
    X = np.array([r.covariates for r in data.records], dtype=float).reshape(len(data), -1)
    flat = draws.flat(constrained=True)
    p = X.shape[1]
    out = np.empty(flat.shape[0])
    for start in range(0, flat.shape[0], chunk_size):
        chunk = flat[start : start + chunk_size]
        base = chunk[:, 0:1] + chunk[:, 1 : 1 + p] @ X.T
        tau = chunk[:, 1 + p : 2 + p]
        treated = 1.0 / (1.0 + np.exp(-(base + tau)))
        untreated = 1.0 / (1.0 + np.exp(-base))
        out[start : start + chunk.shape[0]] = (treated - untreated).mean(axis=1)
    return out


def ate_posterior(draws: PosteriorDraws, data: RatingDataset) -> SummaryStats:
    """Posterior summary of the average treatment effect."""
    return SummaryStats.from_draws(ate_draws(draws, data))


def pearson_corr(a, b) -> float:
    """Pearson correlation of two equal-length vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("expected two equal-length vectors of size >= 2")
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom == 0.0:
        raise UndefinedStatisticError("correlation undefined for constant input")
    return float(da @ db / denom)


def auc(scores, labels) -> float:
    """Probability a positive outranks a negative; ties count half.

    Equivalent to the Mann-Whitney U statistic normalized by the number of
    (positive, negative) pairs.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = scores.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedStatisticError("both classes required for AUC")
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def recovery_metrics(post_mean, latent_truth) -> RecoveryMetrics:
    """Latent-state recovery: correlation and AUC of posterior means vs truth."""
    truth = np.asarray(latent_truth)
    return RecoveryMetrics(
        corr_with_truth=pearson_corr(post_mean, truth.astype(float)),
        auc=auc(post_mean, truth),
    )


def summarize_params(draws: PosteriorDraws, names: list[str]) -> dict[str, SummaryStats]:
    flat = draws.flat(constrained=True)
    if len(names) != flat.shape[1]:
        raise ConfigurationError("parameter name count does not match draw dimension")
    return {name: SummaryStats.from_draws(flat[:, j]) for j, name in enumerate(names)}
