import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from selbias.increments import (BOUNDED_FAMILIES, FAMILIES, IncrementModel, NotPSDError, SeedSpec,
                                cholesky_factor, gaussian, sample_increments, standardize)


@pytest.mark.parametrize("family", FAMILIES)
def test_standardized_marginals_have_zero_mean_unit_variance(family):
    y = sample_increments(IncrementModel(family, 3), SeedSpec(1), 200_000).ravel()
    se = y.std() / math.sqrt(y.size)
    assert abs(y.mean()) < 4 * se
    # variance SE from the fourth moment
    v_se = math.sqrt((np.mean(y ** 4) - y.var() ** 2) / y.size)
    assert abs(y.var() - 1.0) < 4 * v_se


@pytest.mark.parametrize("family", BOUNDED_FAMILIES)
@pytest.mark.parametrize("rho", [None, 0.3, 1.0])
def test_bounded_families_respect_support_bound(family, rho):
    model = IncrementModel(family, 4, (0.5, 1.0, 2.0, 1.5), rho)
    y = sample_increments(model, SeedSpec(2), 50_000)
    assert np.max(np.abs(y)) <= model.support_bound


def test_support_bound_only_for_bounded_families():
    assert IncrementModel("uniform_centered", 2).support_bound == pytest.approx(math.sqrt(3))
    assert IncrementModel("rademacher", 2, (2.0, 1.0)).support_bound == 2.0
    assert IncrementModel("laplace", 2).support_bound is None


def test_rademacher_values_are_signs():
    y = sample_increments(IncrementModel("rademacher", 5), SeedSpec(3), 10_000)
    assert set(np.unique(y)) == {-1.0, 1.0}


def test_rho_one_gives_identical_columns():
    y = sample_increments(gaussian(2, rho=1.0), SeedSpec(4), 1000)
    assert np.array_equal(y[:, 0], y[:, 1])


@pytest.mark.parametrize("family", FAMILIES)
def test_exchangeable_correlation_is_rho(family):
    y = sample_increments(IncrementModel(family, 2, rho=0.4), SeedSpec(5), 200_000)
    assert np.corrcoef(y.T)[0, 1] == pytest.approx(0.4, abs=0.01)


def test_full_covariance_reproduced():
    cov = [[1.0, 0.5, 0.2], [0.5, 1.0, 0.1], [0.2, 0.1, 2.0]]
    y = sample_increments(IncrementModel("gaussian", 3, cov=cov), SeedSpec(6), 200_000)
    assert np.allclose(np.cov(y.T), cov, atol=0.02)


def test_draws_are_deterministic_and_addressable():
    m = IncrementModel("student_t5", 3, rho=0.2)
    a = sample_increments(m, SeedSpec(7, path=2, step=5), 100)
    b = sample_increments(m, SeedSpec(7, path=2, step=5), 100)
    tail = sample_increments(m, SeedSpec(7, path=2, step=5, replica=40), 60)
    assert np.array_equal(a, b)
    assert np.array_equal(a[40:], tail)
    assert not np.array_equal(a, sample_increments(m, SeedSpec(7, path=3, step=5), 100))


def test_seed_derive_is_deterministic_and_distinct():
    s = SeedSpec(1)
    assert s.derive(3) == s.derive(3)
    assert s.derive(3) != s.derive(4)


def test_seed_spec_validation():
    with pytest.raises(ValueError):
        SeedSpec(-1)
    with pytest.raises(ValueError):
        SeedSpec(0, path=-1)


@pytest.mark.parametrize("kwargs", [
    dict(family="nope", k=2), dict(family="gaussian", k=0), dict(family="gaussian", k=2, scales=(1.0, -1.0)),
    dict(family="gaussian", k=2, rho=1.5), dict(family="laplace", k=2, cov=((1, 0), (0, 1))),
    dict(family="gaussian", k=2, rho=0.1, cov=((1, 0), (0, 1))),
    dict(family="gaussian", k=3, cov=((1, 0), (0, 1))),
])
def test_invalid_models_rejected(kwargs):
    with pytest.raises(ValueError):
        IncrementModel(**kwargs)


def test_standardize_t5_scale():
    assert standardize("student_t5").scale ** 2 == pytest.approx(0.6)
    with pytest.raises(ValueError):
        standardize("cauchy")


@pytest.mark.parametrize("sigma, expected", [
    ([[4.0, 2.0], [2.0, 2.0]], [[2.0, 0.0], [1.0, 1.0]]),
    ([[1.0, 1.0], [1.0, 1.0]], [[1.0, 0.0], [1.0, 0.0]]),
    ([[9.0]], [[3.0]]),
    ([[0.0, 0.0], [0.0, 1.0]], [[0.0, 0.0], [0.0, 1.0]]),
])
def test_cholesky_examples(sigma, expected):
    assert np.allclose(cholesky_factor(sigma), expected, atol=1e-12)


def test_cholesky_not_psd_names_minor():
    with pytest.raises(NotPSDError) as exc:
        cholesky_factor([[1.0, 0.0, 0.0], [0.0, 1.0, 2.0], [0.0, 2.0, 1.0]])
    assert exc.value.minor == 3


def test_cholesky_rejects_asymmetric():
    with pytest.raises(ValueError):
        cholesky_factor([[1.0, 0.5], [0.0, 1.0]])


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_cholesky_reconstructs_psd_matrices(k, rank, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((k, min(rank, k)))
    sigma = a @ a.T
    L = cholesky_factor(sigma)
    assert np.allclose(np.tril(L), L)
    assert np.max(np.abs(L @ L.T - sigma)) <= 1e-10 * max(1.0, np.abs(sigma).max())


def test_model_dict_round_trip():
    for m in [IncrementModel("laplace", 3, (1.0, 2.0, 3.0), 0.2),
              IncrementModel("gaussian", 2, cov=((1.0, 0.3), (0.3, 2.0)))]:
        assert IncrementModel.from_dict(m.to_dict()) == m


def test_covariance_of_exchangeable_model():
    m = IncrementModel("uniform_centered", 3, (1.0, 2.0, 1.0), 0.5)
    c = m.covariance()
    assert c[0, 1] == pytest.approx(1.0) and c[1, 1] == pytest.approx(4.0)
