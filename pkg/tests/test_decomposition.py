import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from selbias.decomposition import (EnsembleConfig, bias_concentration, crude_upper_bound, decay_time,
                                   envelope_sweep, expected_max, gaussian_concentration_ratio,
                                   gaussian_psi, nested_premium, normalized_profile, premium_profile,
                                   smoothed_psi, subgaussian_envelope)
from selbias.increments import IncrementModel, SeedSpec, gaussian
from selbias.premium import g_normal

RAD2 = IncrementModel("rademacher", 2)


def enumerate_expected_max(n):
    """Exact E[M_i], i = 1..n, for two independent +-1 walks (4**n outcomes)."""
    totals = [Fraction(0)] * n
    for steps in itertools.product(((-1, -1), (-1, 1), (1, -1), (1, 1)), repeat=n):
        s = [0, 0]
        for i, (a, b) in enumerate(steps):
            s[0] += a
            s[1] += b
            totals[i] += max(s)
    return [t / 4 ** n for t in totals]


def test_enumeration_oracle_values():
    assert enumerate_expected_max(2) == [Fraction(1, 2), Fraction(3, 4)]


def test_rademacher_two_steps_matches_enumeration():
    rep = premium_profile(EnsembleConfig(RAD2, 2, 200_000, SeedSpec(1)))
    exact = [float(x) for x in enumerate_expected_max(2)]
    assert np.all(np.abs(rep.expected_max - exact) <= 3 * rep.expected_max_se)
    assert np.all(np.abs(rep.premium - np.diff([0.0] + exact)) <= 3 * rep.premium_se)


def test_rademacher_six_steps_matches_enumeration():
    rep = premium_profile(EnsembleConfig(RAD2, 6, 100_000, SeedSpec(2)))
    exact = np.array([float(x) for x in enumerate_expected_max(6)])
    assert np.all(np.abs(rep.expected_max - exact) <= 3.5 * rep.expected_max_se)


def test_telescoping_identity():
    rep = premium_profile(EnsembleConfig(IncrementModel("laplace", 5), 40, 5000, SeedSpec(3)))
    assert np.array_equal(rep.expected_max, np.cumsum(rep.premium))
    assert np.allclose(np.diff(rep.expected_max), rep.premium[1:], rtol=0, atol=1e-12)


def test_expected_max_matches_profile_endpoint():
    cfg = EnsembleConfig(IncrementModel("exponential_centered", 3), 25, 4000, SeedSpec(4))
    assert expected_max(cfg).value == premium_profile(cfg).expected_max[-1]


def test_nested_rademacher_second_step():
    rep = nested_premium(EnsembleConfig(RAD2, 2, 50_000, SeedSpec(5), nested_inner_replicas=400))
    assert abs(rep.nested[0] - 0.5) <= 3 * rep.nested_se[0]
    assert abs(rep.nested[1] - 0.25) <= 3 * rep.nested_se[1]
    assert np.all(np.abs(rep.nested_diff) <= 3 * rep.nested_diff_se)
    assert abs(rep.total_gap) <= 3 * rep.total_gap_se


def test_nested_needs_enough_replicas():
    with pytest.raises(ValueError):
        premium_profile(EnsembleConfig(RAD2, 2, 100, nested_inner_replicas=50))
    with pytest.raises(ValueError):
        nested_premium(EnsembleConfig(RAD2, 2, 100))


@pytest.mark.parametrize("kwargs", [dict(horizon=0, paths=10), dict(horizon=3, paths=1),
                                    dict(horizon=3, paths=10, workers=0),
                                    dict(horizon=3, paths=10, nested_inner_replicas=0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        EnsembleConfig(RAD2, **kwargs)


def test_gaussian_expected_max_is_sqrt_n_g():
    n = 64
    rep = premium_profile(EnsembleConfig(gaussian(5), n, 40_000, SeedSpec(6)))
    g = g_normal(5).value
    assert abs(rep.expected_max[-1] - g * math.sqrt(n)) <= 3 * rep.expected_max_se[-1]
    assert rep.psi[0] == 1.0 and np.all(np.isfinite(rep.psi))


def test_psi_undefined_without_selection():
    rep = premium_profile(EnsembleConfig(gaussian(1), 10, 1000, SeedSpec(7)))
    assert rep.psi is None
    with pytest.raises(ValueError):
        normalized_profile(rep)
    with pytest.raises(ValueError):
        decay_time(rep, 0.1)


def test_gaussian_psi_values():
    assert gaussian_psi(1) == 1.0
    assert np.allclose(gaussian_psi([2, 5, 10, 26]), [0.41421, 0.23607, 0.16228, 0.09902], atol=5e-6)
    assert np.all(np.diff(gaussian_psi(np.arange(1, 1000))) < 0)


@given(st.floats(0.01, 1.0))
def test_analytic_decay_time_is_first_crossing(alpha):
    t = decay_time("analytic_gaussian", alpha)
    i = np.arange(1, t + 1)
    psi = np.sqrt(i) - np.sqrt(i - 1)
    assert psi[-1] < alpha and (t == 1 or np.all(gaussian_psi(i[:-1]) >= alpha))
    assert abs(psi[-1] - gaussian_psi(t)) < 1e-12


def test_analytic_decay_time_anchor():
    assert decay_time("analytic_gaussian", 0.1) == 26
    with pytest.raises(ValueError):
        decay_time("analytic_gaussian", 0.0)
    with pytest.raises(ValueError):
        decay_time("tabulated", 0.1)


def test_empirical_decay_time_and_not_reached():
    rep = premium_profile(EnsembleConfig(gaussian(10), 12, 20_000, SeedSpec(8)), alphas=(0.5, 0.1))
    assert rep.decay[0.5] == decay_time(rep, 0.5)
    assert rep.decay[0.5] == decay_time("analytic_gaussian", 0.5) == 2
    assert rep.decay[0.1] is None
    sm = smoothed_psi(rep)
    assert np.all(np.diff(sm) <= 1e-12) and sm[0] == pytest.approx(1.0, abs=1e-6)


def test_concentration_alpha_one_and_analytic():
    pts = bias_concentration(EnsembleConfig(gaussian(3), 100, 2000, SeedSpec(9)), [1.0, 0.25])
    assert pts[0].ratio == 1.0 and pts[0].std_error == 0.0
    assert pts[1].step == 25 and abs(pts[1].ratio - 0.5) < 5 * pts[1].std_error + 0.02
    assert gaussian_concentration_ratio(0.01) == 0.1
    assert gaussian_concentration_ratio(0.3, 10) == math.sqrt(0.3)
    with pytest.raises(ValueError):
        bias_concentration(EnsembleConfig(gaussian(3), 10, 100), [0.05])


def test_envelope_values():
    assert subgaussian_envelope(100, 1, 1.0) == 0.0
    assert subgaussian_envelope(8, 4, 2.0) == pytest.approx(math.sqrt(32 * math.log(4)))
    with pytest.raises(ValueError):
        subgaussian_envelope(0, 2, 1.0)


def test_crude_bound_rademacher():
    n = 30
    c = crude_upper_bound(n, RAD2, 100_000, SeedSpec(10))
    assert abs(c.value - 0.5 * n) <= 3 * c.std_error


def test_envelope_sweep_small():
    rep = envelope_sweep([10, 40], [2, 5], ["rademacher", "uniform_centered"], 3000, SeedSpec(11),
                         crude_replicas=2000)
    assert len(rep.points) == 8
    for p in rep.points:
        assert p.mean <= p.envelope + 3 * p.std_error
        assert p.mean <= p.crude + 3 * (p.std_error + p.crude_se)
    assert 0.3 < rep.slope("rademacher", 5) < 0.7
    with pytest.raises(ValueError):
        envelope_sweep([10], [2], ["laplace"], 100)


def test_worker_count_does_not_change_results():
    cfg = dict(model=IncrementModel("student_t5", 4, rho=0.3), horizon=20, paths=5000, seed=SeedSpec(12),
               nested_inner_replicas=100)
    a = premium_profile(EnsembleConfig(**cfg, workers=1))
    b = premium_profile(EnsembleConfig(**cfg, workers=4))
    for f in ("premium", "premium_se", "expected_max", "nested", "nested_diff", "psi"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
