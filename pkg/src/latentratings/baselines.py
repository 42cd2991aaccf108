"""Naive comparators: majority vote with plug-in error rates and a
frequentist logistic regression, plus a single-rating model fit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .data import RatingDataset, truncate_ratings
from .fitting import FitResult, fit
from .hmc import SamplerConfig
from .model import PriorConfig

TieBreak = Literal["to-zero", "to-one"]

SEPARATION_BOUND = 20.0
SCORE_TOL = 1e-8
MAX_NEWTON_ITER = 100


class VoteClassError(ValueError):
    """A vote class is empty, leaving an error rate undefined."""


@dataclass(frozen=True)
class LogisticFit:
    """Maximum-likelihood logistic regression result.

    ``coefs`` is ordered [intercept, features...]. ``converged`` is False on
    iteration exhaustion or suspected separation (coefficients drifting past
    +-20); callers must check it before trusting the estimates.
    """

    coefs: np.ndarray
    converged: bool
    n_iter: int
    separation_suspected: bool
    log_likelihood: float


@dataclass(frozen=True)
class MajorityVoteResult:
    votes: tuple[int, ...]
    est_fpr: float
    est_fnr: float
    intercept: float
    betas: tuple[float, ...]
    tau: float
    est_ate: float
    regression: LogisticFit


def majority_vote(dataset: RatingDataset, tie_break: TieBreak = "to-zero") -> tuple[int, ...]:
    """Vote 1 iff more than half the ratings are positive; ties per ``tie_break``."""
    votes = []
    for r in dataset.records:
        if 2 * r.k_positive > r.n_ratings:
            votes.append(1)
        elif 2 * r.k_positive < r.n_ratings:
            votes.append(0)
        else:
            votes.append(0 if tie_break == "to-zero" else 1)
    return tuple(votes)


def vote_error_rates(dataset: RatingDataset, votes) -> tuple[float, float]:
    """Error rates with the votes taken as the true classes.

    Pools ratings across calls: the estimated false positive rate is the
    share of positive ratings among all rounds of vote-0 calls, and
    symmetrically for the false negative rate.
    """
    votes = list(votes)
    if len(votes) != len(dataset.records):
        raise ValueError("votes and dataset have different lengths")
    pos_in_zero = n_in_zero = neg_in_one = n_in_one = 0
    for r, v in zip(dataset.records, votes):
        if v == 0:
            pos_in_zero += r.k_positive
            n_in_zero += r.n_ratings
        else:
            neg_in_one += r.n_ratings - r.k_positive
            n_in_one += r.n_ratings
    if n_in_zero == 0 or n_in_one == 0:
        raise VoteClassError("a vote class is empty; error rate undefined")
    return pos_in_zero / n_in_zero, neg_in_one / n_in_one


def _log_lik_logistic(eta: np.ndarray, y: np.ndarray) -> float:
    return float((y * eta - np.logaddexp(0.0, eta)).sum())


def logistic_fit(features: np.ndarray, labels: np.ndarray) -> LogisticFit:
    """Newton-Raphson (IRLS) maximum likelihood with step halving.

    ``features`` excludes the intercept column, which is always prepended.
    Converges when the largest score component falls below 1e-8; stops early
    with ``converged=False`` whenever coefficients drift past +-20, the usual
    symptom of separated data.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(labels, dtype=float)
    if set(np.unique(y)) - {0.0, 1.0}:
        raise ValueError("labels must be 0/1")
    if y.min() == y.max():
        raise ValueError("both label classes required")
    design = np.column_stack([np.ones(len(y)), X])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise ValueError("design matrix is rank deficient")

    coefs = np.zeros(design.shape[1])
    eta = design @ coefs
    ll = _log_lik_logistic(eta, y)
    for it in range(1, MAX_NEWTON_ITER + 1):
        mu = 1.0 / (1.0 + np.exp(-eta))
        score = design.T @ (y - mu)
        if np.max(np.abs(score)) < SCORE_TOL:
            return LogisticFit(coefs, True, it - 1, False, ll)
        w = mu * (1.0 - mu)
        hess = design.T @ (design * w[:, None])
        try:
            direction = np.linalg.solve(hess, score)
        except np.linalg.LinAlgError:
            return LogisticFit(coefs, False, it - 1, True, ll)
        step = 1.0
        while step > 1e-10:
            trial = coefs + step * direction
            trial_eta = design @ trial
            trial_ll = _log_lik_logistic(trial_eta, y)
            if trial_ll >= ll:
                break
            step /= 2.0
        coefs = coefs + step * direction
        eta = design @ coefs
        ll = _log_lik_logistic(eta, y)
        if np.max(np.abs(coefs)) > SEPARATION_BOUND:
            return LogisticFit(coefs, False, it, True, ll)
    return LogisticFit(coefs, False, MAX_NEWTON_ITER, False, ll)


def majority_vote_analysis(
    dataset: RatingDataset, tie_break: TieBreak = "to-zero"
) -> MajorityVoteResult:
    """Full majority-vote baseline: votes, error rates, regression, effect.

    The treatment effect is g-computation at the logistic MLE: predicted vote
    probabilities averaged over all calls with treatment forced on and off.
    """
    votes = majority_vote(dataset, tie_break)
    est_fpr, est_fnr = vote_error_rates(dataset, votes)
    X = np.array([r.covariates for r in dataset.records], dtype=float).reshape(
        len(dataset), -1
    )
    T = np.array([r.treatment for r in dataset.records], dtype=float)
    reg = logistic_fit(np.column_stack([X, T]), np.array(votes, dtype=float))
    p = X.shape[1]
    intercept = float(reg.coefs[0])
    betas = tuple(float(b) for b in reg.coefs[1 : 1 + p])
    tau = float(reg.coefs[1 + p])
    base = intercept + X @ np.asarray(betas)
    est_ate = float(
        np.mean(1.0 / (1.0 + np.exp(-(base + tau))) - 1.0 / (1.0 + np.exp(-base)))
    )
    return MajorityVoteResult(
        votes=votes,
        est_fpr=float(est_fpr),
        est_fnr=float(est_fnr),
        intercept=intercept,
        betas=betas,
        tau=tau,
        est_ate=est_ate,
        regression=reg,
    )


def naive_single_rating_fit(
    dataset: RatingDataset,
    priors: PriorConfig | None = None,
    sampler_config: SamplerConfig | None = None,
) -> FitResult:
    """Fit the homogeneous-error model to the first rating of every call."""
    single = dataset if all(r.n_ratings == 1 for r in dataset.records) else truncate_ratings(dataset, 1)
    return fit(single, kind="base", priors=priors, sampler_config=sampler_config)
