"""Mixture model for repeated noisy binary ratings of latent call states.

Each call has an unobserved binary state. A logistic regression on covariates
and treatment gives the per-call prior probability of the positive state; the
observed count of positive ratings is binomial with a rate that depends on the
latent state through the rater's false positive / false negative rates. The
latent state is summed out analytically, so the log posterior is smooth and
has analytic gradients, suitable for gradient-based MCMC.

Two variants:

* ``base``: one global false positive rate and one global false negative
  rate, both restricted to (0, 0.5) to break the two-class relabeling
  symmetry.
* ``extended``: per-call error rates driven by an observed difficulty score
  via logit(2 * rate) = alpha + gamma * difficulty, with gamma > 0.

Sampling happens in an unconstrained space: error rates map through
``0.5 * sigmoid``, slopes through ``exp``; all other coordinates are identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np
from scipy.special import gammaln

from .data import CallRecord, RatingDataset

ModelKind = Literal["base", "extended"]

LOG_HALF = math.log(0.5)
LOG_TWO = math.log(2.0)


class ConfigurationError(ValueError):
    """Model/parameter/data combination is inconsistent."""


@dataclass(frozen=True)
class BaseParams:
    """Constrained parameters of the homogeneous-error model.

    ``fpr`` and ``fnr`` must lie strictly inside (0, 0.5) for a finite prior;
    out-of-range values are representable so that density code can reject
    them with -inf instead of raising.
    """

    intercept: float
    betas: tuple[float, ...]
    tau: float
    fpr: float
    fnr: float


@dataclass(frozen=True)
class ExtParams:
    """Constrained parameters of the heterogeneous-error model."""

    intercept: float
    betas: tuple[float, ...]
    tau: float
    alpha0: float
    alpha1: float
    gamma0: float
    gamma1: float


Params = Union[BaseParams, ExtParams]


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters for every prior.

    Defaults match the bundled ``study1``/``study2`` simulation presets:
    weakly informative normals on the regression block, uniform error rates
    on (0, 0.5), and lognormal difficulty slopes.
    """

    mu_theta: float = -3.0
    sigma_theta: float = 2.0
    mu_beta: float = 0.0
    sigma_beta: float = 1.0
    mu_tau: float = 0.05
    sigma_tau: float = 0.5
    mu_alpha0: float = -1.5
    sigma_alpha0: float = 1.0
    mu_alpha1: float = -1.5
    sigma_alpha1: float = 1.0
    mu_gamma0: float = 0.0
    sigma_gamma0: float = 0.5
    mu_gamma1: float = 0.0
    sigma_gamma1: float = 0.5

    def __post_init__(self) -> None:
        for name in (
            "sigma_theta",
            "sigma_beta",
            "sigma_tau",
            "sigma_alpha0",
            "sigma_alpha1",
            "sigma_gamma0",
            "sigma_gamma1",
        ):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")


@dataclass(eq=False)
class UnconstrainedVector:
    """Point in the sampler's unconstrained space.

    Layout: [intercept, betas..., tau, u_fpr, u_fnr] for the base model and
    [intercept, betas..., tau, alpha0, alpha1, log_gamma0, log_gamma1] for
    the extended model.
    """

    values: np.ndarray
    model_kind: ModelKind

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ConfigurationError("unconstrained vector must be 1-D")
        if self.n_covariates < 0:
            raise ConfigurationError(
                f"dimension {self.values.size} too small for {self.model_kind} model"
            )

    @property
    def n_covariates(self) -> int:
        extra = 4 if self.model_kind == "base" else 6
        return self.values.size - extra


def inverse_logit(x):
    """Numerically stable logistic function, scalar or array."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out) if out.ndim == 0 else out


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -np.asarray(x, dtype=float))


def _expit_scalar(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


def _log_sigmoid_scalar(x: float) -> float:
    return -math.log1p(math.exp(-x)) if x >= 0 else x - math.log1p(math.exp(x))


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def _logaddexp2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # two-term log-sum-exp; assumes at least one of a, b is finite elementwise
    m = np.maximum(a, b)
    return m + np.log1p(np.exp(-np.abs(a - b)))


def theta_c(params: Params, record: CallRecord) -> float:
    """Per-call prior probability of the positive latent state."""
    if len(record.covariates) != len(params.betas):
        raise ConfigurationError(
            f"call {record.call_id!r} has {len(record.covariates)} covariates, "
            f"model expects {len(params.betas)}"
        )
    z = params.intercept + params.tau * record.treatment
    z += sum(b * x for b, x in zip(params.betas, record.covariates))
    return float(inverse_logit(z))


def error_rates(params: ExtParams, difficulty: float) -> tuple[float, float]:
    """Per-call (fpr, fnr) under the difficulty model; both in (0, 0.5)."""
    if not math.isfinite(difficulty):
        raise ConfigurationError("difficulty must be finite")
    fpr = 0.5 * inverse_logit(params.alpha0 + params.gamma0 * difficulty)
    fnr = 0.5 * inverse_logit(params.alpha1 + params.gamma1 * difficulty)
    return float(fpr), float(fnr)


def log_binom_component(k: int, n: int, p_positive: float) -> float:
    """log of the binomial pmf, with exact handling of p in {0, 1}."""
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside [0, {n}]")
    if p_positive == 0.0:
        return 0.0 if k == 0 else -math.inf
    if p_positive == 1.0:
        return 0.0 if k == n else -math.inf
    if not 0.0 < p_positive < 1.0:
        raise ValueError(f"p_positive={p_positive} outside [0, 1]")
    log_choose = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    return float(log_choose + k * math.log(p_positive) + (n - k) * math.log1p(-p_positive))


def _call_rates(params: Params, record: CallRecord) -> tuple[float, float]:
    if isinstance(params, BaseParams):
        return params.fpr, params.fnr
    if record.difficulty is None:
        raise ConfigurationError(
            f"call {record.call_id!r}: extended model requires a difficulty value"
        )
    return error_rates(params, record.difficulty)


def log_lik_call(params: Params, record: CallRecord) -> float:
    """Marginal log likelihood of one call's rating count.

    The two latent-state branches are combined by log-sum-exp, so counts far
    in the tail of either binomial stay finite.
    """
    fpr, fnr = _call_rates(params, record)
    th = theta_c(params, record)
    k, n = record.k_positive, record.n_ratings
    log_f0 = log_binom_component(k, n, fpr)
    log_f1 = log_binom_component(k, n, 1.0 - fnr)
    with np.errstate(divide="ignore"):
        la = np.log1p(-th) + log_f0 if th < 1.0 else -math.inf
        lb = math.log(th) + log_f1 if th > 0.0 else -math.inf
    return float(np.logaddexp(la, lb))


def _normal_logpdf(x: float, mu: float, sigma: float) -> float:
    z = (x - mu) / sigma
    return -0.5 * z * z - math.log(sigma) - 0.5 * math.log(2.0 * math.pi)


def log_prior(params: Params, priors: PriorConfig) -> float:
    """Joint log prior density on the constrained space.

    Out-of-support error rates or slopes yield -inf rather than an error.
    """
    lp = _normal_logpdf(params.intercept, priors.mu_theta, priors.sigma_theta)
    for b in params.betas:
        lp += _normal_logpdf(b, priors.mu_beta, priors.sigma_beta)
    lp += _normal_logpdf(params.tau, priors.mu_tau, priors.sigma_tau)
    if isinstance(params, BaseParams):
        for eps in (params.fpr, params.fnr):
            if not 0.0 < eps < 0.5:
                return -math.inf
            lp += LOG_TWO
        return lp
    lp += _normal_logpdf(params.alpha0, priors.mu_alpha0, priors.sigma_alpha0)
    lp += _normal_logpdf(params.alpha1, priors.mu_alpha1, priors.sigma_alpha1)
    for g, mu, sigma in (
        (params.gamma0, priors.mu_gamma0, priors.sigma_gamma0),
        (params.gamma1, priors.mu_gamma1, priors.sigma_gamma1),
    ):
        if g <= 0.0:
            return -math.inf
        lp += _normal_logpdf(math.log(g), mu, sigma) - math.log(g)
    return lp


def constrain(u: UnconstrainedVector) -> tuple[Params, float]:
    """Map an unconstrained vector to constrained parameters.

    Returns the parameters and the log absolute Jacobian determinant of the
    transform (the density correction added to the unconstrained target).
    """
    v = u.values
    p = u.n_covariates
    intercept = float(v[0])
    betas = tuple(float(x) for x in v[1 : 1 + p])
    tau = float(v[1 + p])
    if u.model_kind == "base":
        log_jac = 0.0
        rates = []
        for ue in v[p + 2 : p + 4]:
            rates.append(0.5 * inverse_logit(ue))
            log_jac += LOG_HALF + float(_log_sigmoid(ue)) + float(_log_sigmoid(-ue))
        return BaseParams(intercept, betas, tau, rates[0], rates[1]), log_jac
    alpha0, alpha1 = float(v[p + 2]), float(v[p + 3])
    ug0, ug1 = float(v[p + 4]), float(v[p + 5])
    params = ExtParams(intercept, betas, tau, alpha0, alpha1, math.exp(ug0), math.exp(ug1))
    return params, ug0 + ug1


def unconstrain(params: Params) -> UnconstrainedVector:
    """Inverse of :func:`constrain` (without the Jacobian)."""
    head = [params.intercept, *params.betas, params.tau]
    if isinstance(params, BaseParams):
        tail = [_logit(2.0 * params.fpr), _logit(2.0 * params.fnr)]
        kind: ModelKind = "base"
    else:
        tail = [params.alpha0, params.alpha1, math.log(params.gamma0), math.log(params.gamma1)]
        kind = "extended"
    return UnconstrainedVector(np.array(head + tail, dtype=float), kind)


def _logit(p: float) -> float:
    return math.log(p) - math.log1p(-p)


def param_names(kind: ModelKind, covariate_names: tuple[str, ...]) -> list[str]:
    names = ["intercept", *[f"beta_{c}" for c in covariate_names], "tau"]
    if kind == "base":
        return names + ["fpr", "fnr"]
    return names + ["alpha0", "alpha1", "gamma0", "gamma1"]


class Posterior:
    """Vectorized unconstrained-space log posterior for one dataset.

    Precomputes the design arrays once; ``value_and_grad`` is the sampler's
    hot path and is pure, so several chains may evaluate it concurrently.
    """

    def __init__(self, dataset: RatingDataset, priors: PriorConfig, kind: ModelKind):
        if kind not in ("base", "extended"):
            raise ConfigurationError(f"unknown model kind {kind!r}")
        if kind == "extended" and not dataset.has_difficulty:
            raise ConfigurationError("extended model requires difficulty values")
        self.kind = kind
        self.priors = priors
        self.covariate_names = dataset.covariate_names
        recs = dataset.records
        self._X = np.array([r.covariates for r in recs], dtype=float).reshape(len(recs), -1)
        self._T = np.array([r.treatment for r in recs], dtype=float)
        self._k = np.array([r.k_positive for r in recs], dtype=float)
        self._n = np.array([r.n_ratings for r in recs], dtype=float)
        self._H = (
            np.array([r.difficulty for r in recs], dtype=float)
            if dataset.has_difficulty
            else None
        )
        self._log_choose = (
            gammaln(self._n + 1) - gammaln(self._k + 1) - gammaln(self._n - self._k + 1)
        )
        self.n_covariates = self._X.shape[1]
        self.dim = self.n_covariates + (4 if kind == "base" else 6)
        # regression block as one matvec: columns [1, X..., T]
        self._design = np.column_stack(
            [np.ones(len(recs)), self._X, self._T]
        )
        self._nk = self._n - self._k
        self._k_total = float(self._k.sum())
        self._nk_total = float(self._nk.sum())
        # base-model likelihood terms take one value per distinct (k, n) pair
        pairs, inv = np.unique(
            np.column_stack([self._k, self._n]), axis=0, return_inverse=True
        )
        self._uk = pairs[:, 0]
        self._unk = pairs[:, 1] - pairs[:, 0]
        self._u_log_choose = (
            gammaln(pairs[:, 1] + 1) - gammaln(pairs[:, 0] + 1) - gammaln(self._unk + 1)
        )
        self._group = inv.ravel()
        p = self.n_covariates
        self._norm_loc = np.array(
            [priors.mu_theta] + [priors.mu_beta] * p + [priors.mu_tau]
            + ([priors.mu_alpha0, priors.mu_alpha1] if kind == "extended" else [])
        )
        self._norm_scale = np.array(
            [priors.sigma_theta] + [priors.sigma_beta] * p + [priors.sigma_tau]
            + ([priors.sigma_alpha0, priors.sigma_alpha1] if kind == "extended" else [])
        )
        self.param_names = param_names(kind, dataset.covariate_names)

    def _check(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise ConfigurationError(f"expected vector of length {self.dim}, got {u.shape}")
        return u

    def value_and_grad(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        u = self._check(u)
        p = self.n_covariates
        k, nk = self._k, self._nk

        z = self._design @ u[: p + 2]
        sp = _softplus(z)
        log_th = z - sp
        log_1mth = -sp
        th = np.exp(log_th)

        grad = np.empty(self.dim)
        if self.kind == "base":
            ue0, ue1 = float(u[p + 2]), float(u[p + 3])
            s0, s1 = _expit_scalar(ue0), _expit_scalar(ue1)
            ls0, ls1 = _log_sigmoid_scalar(ue0), _log_sigmoid_scalar(ue1)
            ls0m, ls1m = _log_sigmoid_scalar(-ue0), _log_sigmoid_scalar(-ue1)
            log_e0, log_1me0 = LOG_HALF + ls0, math.log1p(-0.5 * s0)
            log_e1, log_1me1 = LOG_HALF + ls1, math.log1p(-0.5 * s1)
            f0 = self._u_log_choose + self._uk * log_e0 + self._unk * log_1me0
            f1 = self._u_log_choose + self._uk * log_1me1 + self._unk * log_e1
            la = log_1mth + f0[self._group]
            lb = log_th + f1[self._group]
            log_mix = _logaddexp2(la, lb)
            w1 = np.exp(lb - log_mix)

            gz = w1 - th
            grad[: p + 2] = gz @ self._design
            w1k = float(w1 @ k)
            w1nk = float(w1 @ nk)
            w0k = self._k_total - w1k
            w0nk = self._nk_total - w1nk
            # likelihood score on the rate logits, plus the transform's
            # Jacobian derivative; the uniform rate prior is flat
            grad[p + 2] = (1.0 - s0) * (w0k - s0 / (2.0 - s0) * w0nk) + 1.0 - 2.0 * s0
            grad[p + 3] = (1.0 - s1) * (w1nk - s1 / (2.0 - s1) * w1k) + 1.0 - 2.0 * s1
            log_jac = 2.0 * LOG_HALF + ls0 + ls0m + ls1 + ls1m
            value = float(log_mix.sum()) + 2.0 * LOG_TWO + log_jac
            n_norm = p + 2
        else:
            H = self._H
            gamma0, gamma1 = math.exp(u[p + 4]), math.exp(u[p + 5])
            a0 = u[p + 2] + gamma0 * H
            a1 = u[p + 3] + gamma1 * H
            t0 = _softplus(-a0)
            t1 = _softplus(-a1)
            s0v = np.exp(-t0)
            s1v = np.exp(-t1)
            f0 = self._log_choose + k * (LOG_HALF - t0) + nk * np.log1p(-0.5 * s0v)
            f1 = self._log_choose + k * np.log1p(-0.5 * s1v) + nk * (LOG_HALF - t1)
            la = log_1mth + f0
            lb = log_th + f1
            log_mix = _logaddexp2(la, lb)
            w1 = np.exp(lb - log_mix)
            w0 = 1.0 - w1

            gz = w1 - th
            grad[: p + 2] = gz @ self._design
            g0 = w0 * (1.0 - s0v) * (k - nk * (s0v / (2.0 - s0v)))
            g1 = w1 * (1.0 - s1v) * (nk - k * (s1v / (2.0 - s1v)))
            grad[p + 2] = g0.sum()
            grad[p + 3] = g1.sum()
            grad[p + 4] = gamma0 * float(g0 @ H)
            grad[p + 5] = gamma1 * float(g1 @ H)
            value = float(log_mix.sum())
            # lognormal prior plus exp-transform Jacobian collapse to a normal
            # density on log(gamma)
            for i, (mu, sigma) in enumerate(
                ((self.priors.mu_gamma0, self.priors.sigma_gamma0),
                 (self.priors.mu_gamma1, self.priors.sigma_gamma1))
            ):
                zg = (float(u[p + 4 + i]) - mu) / sigma
                value += -0.5 * zg * zg - math.log(sigma) - 0.5 * math.log(2 * math.pi)
                grad[p + 4 + i] += -zg / sigma
            n_norm = p + 4

        zn = (u[:n_norm] - self._norm_loc) / self._norm_scale
        value += float(
            (-0.5 * zn * zn - np.log(self._norm_scale) - 0.5 * math.log(2 * math.pi)).sum()
        )
        grad[:n_norm] += -zn / self._norm_scale
        return value, grad

    def value(self, u: np.ndarray) -> float:
        return self.value_and_grad(u)[0]

    def constrain_array(self, u: np.ndarray) -> np.ndarray:
        """Constrained-space image of ``u`` in ``param_names`` order."""
        u = self._check(u)
        out = u.copy()
        p = self.n_covariates
        if self.kind == "base":
            out[p + 2] = 0.5 * inverse_logit(u[p + 2])
            out[p + 3] = 0.5 * inverse_logit(u[p + 3])
        else:
            out[p + 4] = math.exp(u[p + 4])
            out[p + 5] = math.exp(u[p + 5])
        return out

    def to_params(self, u: np.ndarray) -> Params:
        return constrain(UnconstrainedVector(np.asarray(u, dtype=float), self.kind))[0]


def log_posterior(u: UnconstrainedVector, data: RatingDataset, priors: PriorConfig) -> float:
    """Unconstrained-space log posterior density (likelihood + prior + Jacobian)."""
    if not np.all(np.isfinite(u.values)):
        raise ValueError("non-finite unconstrained vector")
    post = Posterior(data, priors, u.model_kind)
    return post.value(u.values)


def grad_log_posterior(
    u: UnconstrainedVector, data: RatingDataset, priors: PriorConfig
) -> np.ndarray:
    """Analytic gradient of :func:`log_posterior` with respect to ``u``."""
    if not np.all(np.isfinite(u.values)):
        raise ValueError("non-finite unconstrained vector")
    post = Posterior(data, priors, u.model_kind)
    return post.value_and_grad(u.values)[1]
