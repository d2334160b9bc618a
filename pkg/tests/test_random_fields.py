import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from gibbsnls.errors import DegenerateData
from gibbsnls.norms import weighted_l2
from gibbsnls.random_fields import (batch_increments, coarsen_increments, empirical_tail,
                                    mode_variance, pointwise_variance, sample_phi, sample_phi_batch,
                                    sample_phi_k, sample_phi_k_batch)
from gibbsnls.spectral import ParameterSet, linear_flow

# 2 atan(6), the integral of (1 + y^2)^-1 over [-6, 6]
TWO_ATAN_6 = 2.81129529876053956190438680399


def test_index_counts():
    s = sample_phi(1, 1, seed=3)
    nz = np.flatnonzero(s.field.coeffs)
    assert sorted(s.field.grid.indices[nz]) == [-1, 0]
    s1 = sample_phi_k(ParameterSet(k=1), seed=3)
    assert np.count_nonzero(s1.field.coeffs) == 4
    s3 = sample_phi_k(ParameterSet(k=3), seed=3)
    assert s3.field.grid.N == 8
    idx = s3.field.grid.indices[np.flatnonzero(s3.field.coeffs)]
    assert idx.min() == -24 and idx.max() == 23
    np.testing.assert_array_equal(s3.path.indices, np.arange(-24, 24))


def test_coefficients_follow_increments():
    s = sample_phi(4, 2, seed=11)
    j = s.path.indices
    amp = 1.0 / np.sqrt(1.0 + (j / 4) ** 2)
    g = s.field.grid
    np.testing.assert_allclose(s.field.coeffs[j % g.modes], s.path.increments * amp)


@given(seed=st.integers(0, 2 ** 63 - 1))
def test_determinism(seed):
    a = sample_phi(2, 2, seed).field.coeffs
    b = sample_phi(2, 2, seed).field.coeffs
    np.testing.assert_array_equal(a, b)


def test_batch_members_do_not_depend_on_batch_size():
    full = sample_phi_batch(2, 2, seed=5, n=6).coeffs
    tail = sample_phi_batch(2, 2, seed=5, n=2, start=4).coeffs
    np.testing.assert_array_equal(full[4:], tail)


def test_mode_variance_and_independence():
    # covariance of phi_k over 1e4 samples: diagonal within 3 SE, off-diagonal within 3 SE of 0
    p = ParameterSet(k=2)
    n = 10_000
    inc = batch_increments(p.N_k, p.k, seed=2024, n=n)
    j = np.arange(-p.N_k * p.k, p.N_k * p.k)
    a = inc / np.sqrt(1 + (j / p.N_k) ** 2)
    var = mode_variance(p.N_k, j)
    emp = np.mean(np.abs(a) ** 2, axis=0)
    assert np.all(np.abs(emp - var) <= 3 * var / np.sqrt(n) + 1e-15)
    cross = np.abs(np.mean(a[:, 0] * np.conj(a[:, 5])))
    se = np.sqrt(var[0] * var[5] / n)
    assert cross <= 3 * se


def test_pointwise_variance_riemann_sum():
    assert pointwise_variance(64, 6) == pytest.approx(TWO_ATAN_6, rel=1e-2)
    assert pointwise_variance(256, 50) == pytest.approx(np.pi, rel=2e-2)


def test_coarsen_identity():
    fine = batch_increments(8, 2, seed=9, n=3)
    c = coarsen_increments(fine, 3, 1, 2)
    assert c.shape == (3, 2 * 2 * 2)
    np.testing.assert_allclose(c[:, 0], fine[:, :4].sum(axis=1))
    np.testing.assert_array_equal(coarsen_increments(fine, 3, 3, 2), fine)
    with pytest.raises(ValueError):
        coarsen_increments(fine, 3, 4, 2)
    # coarse increments have variance 1 / N_coarse
    many = batch_increments(8, 2, seed=10, n=20_000)
    v = np.mean(np.abs(coarsen_increments(many, 3, 1, 2)) ** 2)
    assert v == pytest.approx(1 / 2, rel=0.02)


def test_empirical_tail_gaussian():
    rng = np.random.default_rng(0)
    a, r2 = empirical_tail(np.abs(rng.standard_normal(20_000)))
    assert a == pytest.approx(0.5, rel=0.2)
    assert r2 > 0.95
    with pytest.raises(DegenerateData):
        empirical_tail(np.ones(2000))
    with pytest.raises(ValueError):
        empirical_tail(np.arange(10.0))


def test_empirical_tail_weighted_norm():
    p = ParameterSet(k=3)
    u = sample_phi_k_batch(p, seed=1, n=4000)
    _, r2 = empirical_tail(weighted_l2(u, -0.6, 1.25))
    assert r2 >= 0.9


def test_linear_flow_invariance_in_law():
    p = ParameterSet(k=2)
    a = sample_phi_k_batch(p, seed=4, n=5000)
    b = linear_flow(sample_phi_k_batch(p, seed=4, n=5000, start=5000), 1.3)
    slot = a.grid.slot(3)
    for part in (np.real, np.imag):
        assert stats.ks_2samp(part(a.coeffs[:, slot]), part(b.coeffs[:, slot])).pvalue > 0.01
