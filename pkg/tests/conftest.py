import numpy as np
import pytest

from latentratings.data import CallRecord, RatingDataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_dataset(rng, n_calls=30, n_covariates=2, difficulty=True, max_ratings=5):
    """Small random dataset for unit tests (not a model simulation)."""
    records = []
    for c in range(n_calls):
        n = int(rng.integers(1, max_ratings + 1))
        records.append(
            CallRecord(
                call_id=f"c{c:03d}",
                n_ratings=n,
                k_positive=int(rng.integers(0, n + 1)),
                covariates=tuple(float(x) for x in rng.normal(size=n_covariates)),
                treatment=int(rng.integers(0, 2)),
                difficulty=float(rng.uniform()) if difficulty else None,
            )
        )
    names = tuple(f"x{i + 1}" for i in range(n_covariates))
    return RatingDataset(tuple(records), names, difficulty)


@pytest.fixture
def small_dataset(rng):
    return make_dataset(rng)


@pytest.fixture
def plain_dataset(rng):
    return make_dataset(rng, difficulty=False)
