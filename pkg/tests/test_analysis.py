"""Posterior-summary checks: per-call probabilities, effects, metrics."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from latentratings.analysis import (
    EstimandError,
    SummaryStats,
    UndefinedStatisticError,
    ate_draws,
    ate_posterior,
    auc,
    pearson_corr,
    per_call_posterior,
    posterior_prob_dissatisfied,
    recovery_metrics,
)
from latentratings.data import CallRecord, RatingDataset
from latentratings.hmc import PosteriorDraws
from latentratings.model import BaseParams, unconstrain

from conftest import make_dataset


def rec(k, n, cov=(), treatment=0, difficulty=None, call_id="c1"):
    return CallRecord(call_id, n, k, cov, treatment, difficulty)


def params_with_theta(theta, fpr=0.15, fnr=0.10):
    if theta <= 0:
        return BaseParams(-1e3, (), 0.0, fpr, fnr)
    if theta >= 1:
        return BaseParams(1e3, (), 0.0, fpr, fnr)
    return BaseParams(math.log(theta / (1 - theta)), (), 0.0, fpr, fnr)


def eq6_oracle(theta, fpr, fnr, k, n):
    f0 = math.comb(n, k) * fpr**k * (1 - fpr) ** (n - k)
    f1 = math.comb(n, k) * (1 - fnr) ** k * fnr ** (n - k)
    return theta * f1 / ((1 - theta) * f0 + theta * f1)


class TestPosteriorProb:
    def test_all_positive(self):
        got = posterior_prob_dissatisfied(params_with_theta(0.2), rec(5, 5))
        assert got == pytest.approx(eq6_oracle(0.2, 0.15, 0.10, 5, 5), abs=1e-12)
        assert got == pytest.approx(0.9994858611825193, abs=1e-9)

    def test_all_negative(self):
        got = posterior_prob_dissatisfied(params_with_theta(0.2), rec(0, 5))
        assert got == pytest.approx(5.634338475841015e-06, rel=1e-6)

    def test_zero_prior_mass(self):
        for k in range(6):
            assert posterior_prob_dissatisfied(params_with_theta(0.0), rec(k, 5)) == 0.0

    def test_monotone_in_k(self):
        p = params_with_theta(0.3)
        probs = [posterior_prob_dissatisfied(p, rec(k, 8)) for k in range(9)]
        assert np.all(np.diff(probs) > 0)

    @given(
        st.floats(0.05, 0.95),
        st.floats(0.02, 0.48),
        st.floats(0.02, 0.48),
        st.integers(1, 10),
        st.data(),
    )
    def test_class_swap_consistency(self, theta, fpr, fnr, n, data):
        """One minus the positive-state probability equals the same formula
        with the class roles exchanged."""
        k = data.draw(st.integers(0, n))
        got = posterior_prob_dissatisfied(params_with_theta(theta, fpr, fnr), rec(k, n))
        swapped = posterior_prob_dissatisfied(
            params_with_theta(1 - theta, fnr, fpr), rec(n - k, n)
        )
        assert got == pytest.approx(1 - swapped, abs=1e-12)


def draws_from_params(params_list, kind="base"):
    arr = np.stack([unconstrain(p).values for p in params_list])
    # single chain, constrained == per-parameter transform applied
    constrained = arr.copy()
    if kind == "base":
        p = arr.shape[1] - 4
        constrained[:, p + 2] = 0.5 / (1.0 + np.exp(-arr[:, p + 2]))
        constrained[:, p + 3] = 0.5 / (1.0 + np.exp(-arr[:, p + 3]))
    return PosteriorDraws(
        draws=constrained[None],
        unconstrained_draws=arr[None],
        accept_rate=np.array([1.0]),
        divergence_count=np.array([0]),
    )


class TestPerCallPosterior:
    def test_degenerate_draws_match_single_point(self):
        params = params_with_theta(0.2)
        draws = draws_from_params([params] * 8)
        records = tuple(rec(k, 5, call_id=f"c{k}") for k in range(6))
        ds = RatingDataset(records, (), False)
        out = per_call_posterior(draws, ds)
        for r, mean, lo, hi in zip(ds.records, out.mean, out.lo95, out.hi95):
            want = posterior_prob_dissatisfied(params, r)
            assert mean == pytest.approx(want, abs=1e-10)
            assert lo == pytest.approx(want, abs=1e-10)
            assert hi == pytest.approx(want, abs=1e-10)

    def test_full_vs_plugin(self, rng):
        ds = make_dataset(rng, n_calls=12, difficulty=False)
        params = [
            params_with_theta(t, f, g)
            for t, f, g in zip(
                rng.uniform(0.1, 0.5, 40), rng.uniform(0.05, 0.3, 40), rng.uniform(0.05, 0.3, 40)
            )
        ]
        # zero-covariate params against 2-covariate data: rebuild with betas
        params = [
            BaseParams(p.intercept, (0.1, -0.2), 0.05, p.fpr, p.fnr) for p in params
        ]
        draws = draws_from_params(params)
        full = per_call_posterior(draws, ds)
        plug = per_call_posterior(draws, ds, plugin=True)
        assert full.mean.shape == plug.mean.shape
        assert np.all(full.lo95 <= full.mean + 1e-12)
        assert np.all(full.mean <= full.hi95 + 1e-12)

    def test_k_ordering(self):
        params = [params_with_theta(t) for t in (0.2, 0.3, 0.4)]
        draws = draws_from_params(params)
        ds = RatingDataset((rec(5, 5, call_id="hi"), rec(0, 5, call_id="lo")), (), False)
        out = per_call_posterior(draws, ds)
        assert out.mean[0] > out.mean[1]


class TestAtePosterior:
    def test_point_mass_at_zero(self):
        params = [BaseParams(0.3, (0.2,), 0.0, 0.1, 0.1) for _ in range(5)]
        draws = draws_from_params(params)
        ds = RatingDataset(
            (
                rec(1, 2, cov=(0.5,), treatment=1, call_id="a"),
                rec(0, 2, cov=(-0.5,), treatment=0, call_id="b"),
            ),
            ("x1",),
            False,
        )
        out = ate_posterior(draws, ds)
        assert out.mean == 0.0 and out.sd == 0.0

    def test_single_call_oracle(self):
        params = [BaseParams(-1.5, (0.75, -0.5), -0.8, 0.15, 0.10)]
        draws = draws_from_params(params)
        ds = RatingDataset(
            (
                rec(0, 5, cov=(0.0, 0.0), treatment=0, call_id="a"),
                rec(0, 5, cov=(0.0, 0.0), treatment=1, call_id="b"),
            ),
            ("x1", "x2"),
            False,
        )
        out = ate_posterior(draws, ds)
        assert out.mean == pytest.approx(-0.09130256279150019, abs=1e-12)

    def test_mean_linearity(self, rng):
        ds = make_dataset(rng, n_calls=10, difficulty=False)
        params = [
            BaseParams(float(a), (0.1, 0.0), float(t), 0.1, 0.1)
            for a, t in zip(rng.normal(size=30), rng.normal(size=30))
        ]
        draws = draws_from_params(params)
        per_draw = ate_draws(draws, ds)
        assert ate_posterior(draws, ds).mean == pytest.approx(per_draw.mean(), rel=1e-12)

    def test_no_treatment_variation(self, rng):
        records = tuple(rec(1, 2, treatment=1, call_id=f"c{i}") for i in range(4))
        ds = RatingDataset(records, (), False)
        draws = draws_from_params([params_with_theta(0.2)])
        with pytest.raises(EstimandError):
            ate_posterior(draws, ds)


class TestPearson:
    def test_identity(self):
        assert pearson_corr([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)

    def test_anti(self):
        assert pearson_corr([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_hand_computed(self):
        assert pearson_corr([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)

    def test_constant_input(self):
        with pytest.raises(UndefinedStatisticError):
            pearson_corr([1.0, 1.0, 1.0], [1, 2, 3])


class TestAuc:
    def test_perfect_separation(self):
        assert auc([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0

    def test_enumerated_pairs(self):
        assert auc([0.9, 0.2, 0.4, 0.6], [1, 0, 1, 0]) == pytest.approx(0.75)

    def test_all_ties(self):
        assert auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5

    def test_single_class(self):
        with pytest.raises(UndefinedStatisticError):
            auc([0.5, 0.6], [1, 1])

    @given(st.data())
    def test_invariant_under_increasing_transform(self, data):
        # scores on a 0.1 grid so exp() cannot collapse distinct values
        n = data.draw(st.integers(4, 30))
        scores = np.array(
            data.draw(st.lists(st.integers(-50, 50), min_size=n, max_size=n))
        ) / 10.0
        labels = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
        if len(set(labels)) < 2:
            return
        a = auc(scores, labels)
        b = auc(np.exp(scores / 2.0), labels)
        assert a == pytest.approx(b, abs=1e-12)


def test_recovery_metrics_combined():
    scores = [0.9, 0.8, 0.2, 0.1]
    labels = [1, 1, 0, 0]
    m = recovery_metrics(scores, labels)
    assert m.auc == 1.0
    assert m.corr_with_truth == pytest.approx(pearson_corr(scores, [1.0, 1.0, 0.0, 0.0]))


def test_summary_stats_quantiles_monotone(rng):
    s = SummaryStats.from_draws(rng.standard_normal(500))
    assert s.q2_5 <= s.median <= s.q97_5
