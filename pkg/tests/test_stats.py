import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbsnls.stats import bonferroni, fit_slope, ks_two_sample, weighted_ks


def test_unit_weights_match_classical_statistic():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=400), rng.normal(0.2, size=300)
    D, p = weighted_ks(a, b, resamples=0)
    assert D == pytest.approx(ks_two_sample(a, b)[0], abs=1e-12)
    assert np.isnan(p)


def test_identical_samples():
    a = np.random.default_rng(2).normal(size=200)
    D, p = weighted_ks(a, a.copy(), resamples=200)
    assert D == 0.0 and p == 1.0


@settings(max_examples=10)
@given(seed=st.integers(0, 2 ** 32))
def test_deterministic_given_seed(seed):
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=100), rng.normal(size=120)
    w = rng.uniform(size=100)
    assert weighted_ks(a, b, w, resamples=100, seed=seed) == \
        weighted_ks(a, b, w, resamples=100, seed=seed)
    assert weighted_ks(a, b, w, resamples=100, seed=[seed, 1, 2])[0] == \
        weighted_ks(a, b, w, resamples=100, seed=seed)[0]


def test_power_and_size():
    rng = np.random.default_rng(4)
    a = rng.normal(size=2000)
    assert weighted_ks(a, rng.normal(size=2000), resamples=300, seed=1)[1] > 0.01
    assert weighted_ks(a, rng.normal(0.3, size=2000), resamples=300, seed=1)[1] < 0.01


def test_weights_reproduce_shifted_law():
    # importance weights exp(x/2 - 1/8) turn N(0,1) draws into N(1/2,1) draws
    rng = np.random.default_rng(5)
    a = rng.normal(size=5000)
    b = rng.normal(0.5, size=5000)
    D, p = weighted_ks(a, b, np.exp(0.5 * a - 0.125), resamples=300, seed=2)
    assert p > 0.01
    with pytest.raises(ValueError):
        weighted_ks(a, b, -np.ones(5000))


def test_bonferroni():
    thr, flags = bonferroni([0.001, 0.004, 0.5], 0.01)
    assert thr == pytest.approx(0.01 / 3)
    assert flags == [True, False, False]


def test_fit_slope():
    x = np.arange(5.0)
    slope, se = fit_slope(x, 3 * x - 1)
    assert slope == pytest.approx(3.0) and se == pytest.approx(0.0, abs=1e-12)
    assert np.isnan(fit_slope([0, 1], [0, 2])[1])
    with pytest.raises(ValueError):
        fit_slope([1.0], [1.0])
