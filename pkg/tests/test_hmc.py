"""Sampler calibration on known targets, determinism, and integrator checks."""

import math

import numpy as np
import pytest

from latentratings.hmc import (
    InitializationError,
    PosteriorDraws,
    SamplerConfig,
    find_reasonable_step_size,
    leapfrog,
    sample,
)


def std_normal(u):
    return float(-0.5 * u @ u), -u


def make_correlated(rho):
    cov = np.array([[1.0, rho], [rho, 1.0]])
    prec = np.linalg.inv(cov)

    def logp(u):
        return float(-0.5 * u @ prec @ u), -(prec @ u)

    return logp


class TestCalibration:
    def test_standard_normal_moments(self):
        draws = sample(std_normal, 2, SamplerConfig(seed=101))
        flat = draws.flat()
        assert np.abs(flat.mean(axis=0)).max() < 0.1
        assert np.abs(flat.var(axis=0) - 1.0).max() < 0.15

    def test_correlated_gaussian(self):
        draws = sample(make_correlated(0.9), 2, SamplerConfig(seed=202))
        flat = draws.flat()
        corr = np.corrcoef(flat.T)[0, 1]
        assert abs(corr - 0.9) < 0.05

    def test_acceptance_near_target(self):
        draws = sample(std_normal, 2, SamplerConfig(seed=103))
        assert np.all(np.abs(draws.accept_rate - 0.8) < 0.1)

    def test_ks_against_analytic_cdf(self):
        """Empirical CDF vs the normal CDF at the 1% level for the
        ESS-adjusted sample size."""
        from math import erf

        from latentratings.diagnostics import ess_bulk

        draws = sample(std_normal, 1, SamplerConfig(seed=404))
        x = np.sort(draws.flat()[:, 0])
        n = x.size
        cdf = 0.5 * (1.0 + np.array([erf(v / math.sqrt(2)) for v in x]))
        ecdf_hi = np.arange(1, n + 1) / n
        ecdf_lo = np.arange(0, n) / n
        ks = max(np.abs(ecdf_hi - cdf).max(), np.abs(ecdf_lo - cdf).max())
        n_eff = min(ess_bulk(draws.draws[:, :, 0]), n)
        critical = 1.6276 / math.sqrt(n_eff)
        assert ks < critical


class TestDeterminism:
    def test_same_seed_identical(self):
        cfg = SamplerConfig(seed=77, n_warmup=200, n_samples=200)
        a = sample(std_normal, 2, cfg)
        b = sample(std_normal, 2, cfg)
        assert np.array_equal(a.draws, b.draws)
        assert np.array_equal(a.accept_rate, b.accept_rate)

    def test_different_seed_differs(self):
        a = sample(std_normal, 2, SamplerConfig(seed=1, n_warmup=200, n_samples=200))
        b = sample(std_normal, 2, SamplerConfig(seed=2, n_warmup=200, n_samples=200))
        assert not np.array_equal(a.draws, b.draws)


class TestLeapfrog:
    def test_reversibility(self):
        rng = np.random.default_rng(0)
        logp = make_correlated(0.5)
        inv_mass = np.array([0.7, 1.3])
        for _ in range(10):
            q0 = rng.normal(size=2)
            p0 = rng.normal(size=2)
            _, grad0 = logp(q0)
            q1, p1, _, grad1 = leapfrog(q0, p0, grad0, logp, 0.15, 25, inv_mass)
            # integrate back with flipped momentum
            q2, p2, _, _ = leapfrog(q1, -p1, grad1, logp, 0.15, 25, inv_mass)
            assert np.abs(q2 - q0).max() < 1e-8
            assert np.abs(-p2 - p0).max() < 1e-8

    def test_energy_conservation_small_step(self):
        logp = make_correlated(0.3)
        q = np.array([0.3, -0.2])
        p = np.array([1.0, 0.5])
        lp0, g = logp(q)
        h0 = -lp0 + 0.5 * p @ p
        q1, p1, lp1, _ = leapfrog(q, p, g, logp, 0.01, 100, np.ones(2))
        h1 = -lp1 + 0.5 * p1 @ p1
        assert abs(h1 - h0) < 1e-3


class TestConfigAndErrors:
    def test_bad_config(self):
        with pytest.raises(ValueError):
            SamplerConfig(n_chains=0)
        with pytest.raises(ValueError):
            SamplerConfig(target_accept=1.5)
        with pytest.raises(ValueError):
            SamplerConfig(leapfrog_steps=0)

    def test_initialization_failure(self):
        def never_finite(u):
            return -math.inf, np.zeros_like(u)

        with pytest.raises(InitializationError):
            sample(never_finite, 2, SamplerConfig(seed=9, n_warmup=10, n_samples=10))

    def test_find_reasonable_step_size_finite(self):
        rng = np.random.default_rng(4)
        eps = find_reasonable_step_size(std_normal, np.zeros(2), np.ones(2), rng)
        assert 1e-6 < eps < 1e3

    def test_draw_shapes_and_constrain(self):
        def double(u):
            return u * 2.0

        cfg = SamplerConfig(seed=5, n_chains=2, n_warmup=50, n_samples=40)
        draws = sample(std_normal, 3, cfg, constrain_fn=double)
        assert draws.draws.shape == (2, 40, 3)
        assert draws.unconstrained_draws.shape == (2, 40, 3)
        assert np.allclose(draws.draws, 2.0 * draws.unconstrained_draws)
        assert draws.accept_rate.shape == (2,)
        assert np.all((draws.accept_rate >= 0) & (draws.accept_rate <= 1))
        assert isinstance(draws, PosteriorDraws)
