"""Convergence diagnostics for multi-chain MCMC output.

Split-Rhat compares between- and within-half-chain variance; bulk effective
sample size rank-normalizes the draws, then truncates the autocorrelation sum
with Geyer's initial positive/monotone sequence rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata


class DiagnosticError(ValueError):
    """Diagnostic undefined for the given chains (e.g. zero variance)."""


DEFAULT_RHAT_THRESHOLD = 1.01
DEFAULT_ESS_THRESHOLD = 400.0


@dataclass(frozen=True)
class Diagnostics:
    """Per-parameter convergence summary for one fit."""

    split_rhat: tuple[float, ...]
    ess_bulk: tuple[float, ...]
    converged: bool
    rhat_threshold: float = DEFAULT_RHAT_THRESHOLD
    ess_threshold: float = DEFAULT_ESS_THRESHOLD

    @property
    def max_rhat(self) -> float:
        return max(self.split_rhat)

    @property
    def min_ess(self) -> float:
        return min(self.ess_bulk)


def _validate(chains: np.ndarray) -> np.ndarray:
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2:
        raise ValueError("expected array of shape (n_chains, n_draws)")
    m, n = chains.shape
    if m < 2:
        raise DiagnosticError("need at least 2 chains")
    if n < 4:
        raise DiagnosticError("need at least 4 draws per chain")
    if np.any(chains.var(axis=1) == 0.0):
        raise DiagnosticError("a chain has zero variance; diagnostic undefined")
    return chains


def _split(chains: np.ndarray) -> np.ndarray:
    n = chains.shape[1]
    half = n // 2
    return np.vstack([chains[:, :half], chains[:, n - half :]])


def split_rhat(chains: np.ndarray) -> float:
    """Potential scale reduction factor on half-chains.

    ``chains``: (n_chains, n_draws) draws of one scalar parameter.
    """
    halves = _split(_validate(chains))
    n = halves.shape[1]
    chain_means = halves.mean(axis=1)
    within = halves.var(axis=1, ddof=1).mean()
    between = n * chain_means.var(ddof=1)
    var_plus = (n - 1) / n * within + between / n
    return float(np.sqrt(var_plus / within))


def _autocov(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of one chain at all lags, via FFT."""
    n = x.size
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x - x.mean(), n=m)
    acov = np.fft.irfft(f * np.conjugate(f), n=m)[:n]
    return acov / n


def _rank_normalize(chains: np.ndarray) -> np.ndarray:
    ranks = rankdata(chains, method="average").reshape(chains.shape)
    return ndtri((ranks - 0.375) / (chains.size + 0.25))


def ess_bulk(chains: np.ndarray) -> float:
    """Bulk effective sample size (rank-normalized, split chains).

    The autocorrelation sum is truncated where consecutive lag pairs turn
    negative and enforced non-increasing (Geyer's rule); strong negative
    autocorrelation can therefore push the estimate above the raw draw count.
    """
    z = _rank_normalize(_split(_validate(chains)))
    m, n = z.shape
    acov = np.asarray([_autocov(z[c]) for c in range(m)])
    chain_means = z.mean(axis=1)
    mean_var = acov[:, 0].mean() * n / (n - 1.0)
    var_plus = mean_var * (n - 1.0) / n
    if m > 1:
        var_plus += chain_means.var(ddof=1)

    rho = np.zeros(n)
    rho[0] = 1.0
    rho_even = 1.0
    rho_odd = 1.0 - (mean_var - acov[:, 1].mean()) / var_plus
    rho[1] = rho_odd
    t = 1
    while t < n - 2 and rho_even + rho_odd >= 0.0:
        rho_even = 1.0 - (mean_var - acov[:, t + 1].mean()) / var_plus
        rho_odd = 1.0 - (mean_var - acov[:, t + 2].mean()) / var_plus
        rho[t + 1] = rho_even
        if rho_even + rho_odd >= 0.0:
            rho[t + 2] = rho_odd
        t += 2
    max_t = t

    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0
            rho[t + 2] = rho[t + 1]
        t += 2

    tau = -1.0 + 2.0 * rho[:max_t].sum() + rho[max_t + 1 : max_t + 2].sum()
    return float(m * n / tau)


def diagnose(
    draws_by_chain: np.ndarray,
    rhat_threshold: float = DEFAULT_RHAT_THRESHOLD,
    ess_threshold: float = DEFAULT_ESS_THRESHOLD,
) -> Diagnostics:
    """Compute per-parameter split-Rhat and bulk ESS.

    ``draws_by_chain``: (n_chains, n_draws, d).
    """
    draws = np.asarray(draws_by_chain, dtype=float)
    if draws.ndim != 3:
        raise ValueError("expected array of shape (n_chains, n_draws, d)")
    rhats, esses = [], []
    for j in range(draws.shape[2]):
        rhats.append(split_rhat(draws[:, :, j]))
        esses.append(ess_bulk(draws[:, :, j]))
    converged = all(r < rhat_threshold for r in rhats) and all(
        e > ess_threshold for e in esses
    )
    return Diagnostics(
        split_rhat=tuple(rhats),
        ess_bulk=tuple(esses),
        converged=converged,
        rhat_threshold=rhat_threshold,
        ess_threshold=ess_threshold,
    )
