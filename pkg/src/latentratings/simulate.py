"""Seedable data-generating processes for the bundled simulation studies.

Generates covariates, treatment assignment, optional difficulty, latent
states, and per-round ratings; returns the observable dataset (with rounds
retained for truncation studies) alongside the hidden ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CallRecord, RatingDataset
from .model import ConfigurationError, ExtParams, Params, inverse_logit


@dataclass(frozen=True)
class CovariateSpec:
    """One covariate column: standard normal or Bernoulli(prob)."""

    kind: str  # "normal" | "bernoulli"
    prob: float | None = None
    name: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("normal", "bernoulli"):
            raise ConfigurationError(f"unknown covariate kind {self.kind!r}")
        if self.kind == "bernoulli":
            if self.prob is None or not 0.0 <= self.prob <= 1.0:
                raise ConfigurationError("bernoulli covariate needs prob in [0, 1]")

    @classmethod
    def parse(cls, text: str, name: str = "") -> "CovariateSpec":
        """Parse ``"normal"`` or ``"bernoulli:p"``."""
        text = text.strip()
        if text == "normal":
            return cls("normal", name=name)
        if text.startswith("bernoulli:"):
            return cls("bernoulli", prob=float(text.split(":", 1)[1]), name=name)
        raise ConfigurationError(f"cannot parse covariate spec {text!r}")

    def describe(self) -> str:
        return "normal" if self.kind == "normal" else f"bernoulli:{self.prob:g}"


@dataclass(frozen=True)
class SimConfig:
    n_calls: int
    n_ratings: int
    true_params: Params
    covariate_spec: tuple[CovariateSpec, ...] = ()
    treatment_prob: float = 0.5
    difficulty_uniform: bool = False  # difficulty ~ U(0, 1) when set
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_calls < 1 or self.n_ratings < 1:
            raise ConfigurationError("n_calls and n_ratings must be >= 1")
        if not 0.0 <= self.treatment_prob <= 1.0:
            raise ConfigurationError("treatment_prob must be in [0, 1]")
        if len(self.covariate_spec) != len(self.true_params.betas):
            raise ConfigurationError(
                f"{len(self.covariate_spec)} covariate specs for "
                f"{len(self.true_params.betas)} coefficients"
            )
        if isinstance(self.true_params, ExtParams) and not self.difficulty_uniform:
            raise ConfigurationError(
                "heterogeneous-error truth requires a difficulty distribution"
            )


@dataclass(frozen=True)
class SimTruth:
    """Hidden ground truth of one simulated dataset."""

    latent_states: tuple[int, ...]
    theta_values: tuple[float, ...]
    per_call_error_rates: tuple[tuple[float, float], ...] | None
    true_ate: float


def true_ate(params: Params, covariates: np.ndarray) -> float:
    """Average treatment effect at the given parameters over a covariate sample.

    Averages the difference between the treated and untreated state
    probabilities across the realized covariate rows (finite-population
    estimand).
    """
    X = np.asarray(covariates, dtype=float).reshape(len(covariates), -1)
    betas = np.asarray(params.betas, dtype=float)
    base = params.intercept + X @ betas
    return float(np.mean(inverse_logit(base + params.tau) - inverse_logit(base)))


def simulate(config: SimConfig) -> tuple[RatingDataset, SimTruth]:
    """Draw one dataset and its ground truth; deterministic given the seed.

    Draw order is fixed: covariate columns, treatment, difficulty, latent
    states, then the full ratings matrix.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed)))
    C, N = config.n_calls, config.n_ratings
    params = config.true_params

    columns = []
    names = []
    for i, spec in enumerate(config.covariate_spec):
        if spec.kind == "normal":
            columns.append(rng.standard_normal(C))
        else:
            columns.append((rng.uniform(size=C) < spec.prob).astype(float))
        names.append(spec.name or f"x{i + 1}")
    X = np.column_stack(columns) if columns else np.zeros((C, 0))

    T = (rng.uniform(size=C) < config.treatment_prob).astype(int)
    H = rng.uniform(size=C) if config.difficulty_uniform else None

    betas = np.asarray(params.betas, dtype=float)
    theta = inverse_logit(params.intercept + X @ betas + params.tau * T)
    D = (rng.uniform(size=C) < theta).astype(int)

    if isinstance(params, ExtParams):
        fpr_c = 0.5 * inverse_logit(params.alpha0 + params.gamma0 * H)
        fnr_c = 0.5 * inverse_logit(params.alpha1 + params.gamma1 * H)
    else:
        fpr_c = np.full(C, params.fpr)
        fnr_c = np.full(C, params.fnr)
    p_positive = np.where(D == 1, 1.0 - fnr_c, fpr_c)
    rounds = (rng.uniform(size=(C, N)) < p_positive[:, None]).astype(int)

    records = []
    for c in range(C):
        records.append(
            CallRecord(
                call_id=f"call_{c + 1:05d}",
                n_ratings=N,
                k_positive=int(rounds[c].sum()),
                covariates=tuple(float(x) for x in X[c]),
                treatment=int(T[c]),
                difficulty=float(H[c]) if H is not None else None,
                rounds=tuple(int(r) for r in rounds[c]),
            )
        )
    dataset = RatingDataset(
        records=tuple(records),
        covariate_names=tuple(names),
        has_difficulty=H is not None,
    )
    truth = SimTruth(
        latent_states=tuple(int(d) for d in D),
        theta_values=tuple(float(t) for t in theta),
        per_call_error_rates=(
            tuple(zip(map(float, fpr_c), map(float, fnr_c)))
            if isinstance(params, ExtParams)
            else None
        ),
        true_ate=true_ate(params, X),
    )
    return dataset, truth
