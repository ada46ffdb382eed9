import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from selbias.decomposition import EnsembleConfig, expected_max
from selbias.increments import IncrementModel, SeedSpec, gaussian
from selbias.sequential import (StoppingRule, exact_stopped_backward, exact_stopped_forward,
                                simulate_stopped, threshold_stop_times, wald_check)

RAD2 = IncrementModel("rademacher", 2)


def brute_force(rule, k):
    """E[M_T], E[T] and sum_i E[phi(S_{i-1}) 1{T >= i}] by listing every sign path."""
    outcomes = list(itertools.product((-1, 1), repeat=k))

    def phi(s):
        return sum(max(a + y for a, y in zip(s, ys)) for ys in outcomes) / len(outcomes) - max(s)

    lhs = rhs = mean_t = 0.0
    p = 1.0 / len(outcomes) ** rule.cap
    for path in itertools.product(outcomes, repeat=rule.cap):
        s = (0,) * k
        for i, ys in enumerate(path, start=1):
            rhs += p * phi(s)
            s = tuple(a + y for a, y in zip(s, ys))
            if rule.stop_now(i, s):
                lhs += p * max(s)
                mean_t += p * i
                break
    return lhs, rhs, mean_t


RULES = [StoppingRule.fixed(5), StoppingRule.threshold(2, 6), StoppingRule.threshold(-1, 4),
         StoppingRule.leader_gap(2, 6), StoppingRule.leader_gap(0, 3)]


@pytest.mark.parametrize("rule", RULES, ids=lambda r: f"{r.variant}-{r.level}-{r.cap}")
@pytest.mark.parametrize("k", [1, 2])
def test_dp_matches_brute_force(rule, k):
    f = exact_stopped_forward(rule, k)
    lhs, rhs, mean_t = brute_force(rule, k)
    assert f.lhs == pytest.approx(lhs, abs=1e-12)
    assert f.rhs == pytest.approx(rhs, abs=1e-12)
    assert f.mean_t == pytest.approx(mean_t, abs=1e-12)


@pytest.mark.parametrize("rule", RULES + [StoppingRule.threshold(3, 20), StoppingRule.leader_gap(2, 18)],
                         ids=lambda r: f"{r.variant}-{r.level}-{r.cap}")
@pytest.mark.parametrize("k", [1, 2])
def test_forward_and_backward_dp_agree_and_satisfy_identity(rule, k):
    f = exact_stopped_forward(rule, k)
    b_lhs, b_rhs = exact_stopped_backward(rule, k)
    assert abs(f.lhs - b_lhs) <= 1e-12 and abs(f.rhs - b_rhs) <= 1e-12
    assert abs(f.lhs - f.rhs) <= 1e-12


def test_exact_oracle_limits():
    with pytest.raises(ValueError):
        exact_stopped_forward(StoppingRule.fixed(21))
    with pytest.raises(ValueError):
        exact_stopped_backward(StoppingRule.fixed(5), k=3)


@pytest.mark.parametrize("kwargs", [dict(variant="sprt", cap=5), dict(variant="fixed", cap=0),
                                    dict(variant="fixed", cap=2.5), dict(variant="threshold", cap=5, level=np.inf)])
def test_rule_validation(kwargs):
    with pytest.raises(ValueError):
        StoppingRule(**kwargs)
    with pytest.raises(ValueError):
        StoppingRule.leader_gap(-1, 5)


def test_rule_decisions():
    th = StoppingRule.threshold(2.0, 10)
    assert not th.stop_now(3, [1.0, 1.9]) and th.stop_now(3, [2.0, -5.0]) and th.stop_now(10, [-9, -9])
    lg = StoppingRule.leader_gap(1.5, 10)
    assert lg.stop_now(2, [3.0, 1.0, 1.4]) and not lg.stop_now(2, [3.0, 2.0, 1.0])
    assert lg.stop_now(1, [0.0])  # a single arm leads by an infinite gap
    assert not StoppingRule.fixed(4).stop_now(3, [100.0]) and StoppingRule.fixed(4).stop_now(4, [0.0])


@given(st.lists(st.lists(st.integers(-3, 3), min_size=2, max_size=2), min_size=1, max_size=8))
def test_decision_uses_only_the_observed_prefix(prefix):
    rule = StoppingRule.threshold(2, 20)
    arr = np.cumsum(np.array(prefix, dtype=float), axis=0)
    assert rule.decide(arr) == rule.stop_now(len(prefix), arr[-1])
    # appending future rows can only be seen as a longer prefix
    assert rule.decide(arr) == rule.decide(np.vstack([arr, arr + 100])[: len(prefix)])


def test_fixed_rule_lhs_equals_expected_max_bit_for_bit():
    m = IncrementModel("uniform_centered", 3)
    s = simulate_stopped(m, StoppingRule.fixed(15), 3000, SeedSpec(1), 100)
    assert s.lhs.value == expected_max(EnsembleConfig(m, 15, 3000, SeedSpec(1))).value
    assert np.all(s.stop_times == 15)


def test_stopped_mc_matches_exact_dp():
    rule = StoppingRule.leader_gap(2, 10)
    s = simulate_stopped(RAD2, rule, 20_000, SeedSpec(2), 200)
    ex = exact_stopped_forward(rule)
    assert abs(s.lhs.value - ex.lhs) <= 3 * s.lhs.std_error
    assert abs(s.rhs.value - ex.rhs) <= 3 * s.rhs.std_error
    assert abs(s.mean_t - ex.mean_t) <= 3 * s.mean_t_se
    assert abs(s.gap) <= 3 * s.gap_se
    assert np.all(np.abs(s.terms - np.array(ex.terms)) <= 4 * s.terms_se + 1e-12)
    assert s.term(11) == 0.0 and s.term(1) == s.terms[0]
    with pytest.raises(ValueError):
        s.term(0)


def test_inner_replicas_minimum():
    with pytest.raises(ValueError):
        simulate_stopped(RAD2, StoppingRule.fixed(3), 100, SeedSpec(), 99)


@pytest.mark.parametrize("mu", [0.0, 0.5, -0.3])
@pytest.mark.parametrize("rule", [StoppingRule.threshold(2, 40), StoppingRule.fixed(8),
                                  StoppingRule.threshold(-1, 30)], ids=lambda r: r.variant + str(r.level))
def test_wald_identity(mu, rule):
    w = wald_check(mu, rule, gaussian(1), 20_000, SeedSpec(3))
    assert abs(w.diff) <= 3 * w.diff_se
    if mu == 0.0:
        assert abs(w.sum_mean) <= 3 * w.sum_se and w.drift_mean == 0.0


def test_wald_needs_single_arm():
    with pytest.raises(ValueError):
        wald_check(0.1, StoppingRule.fixed(3), gaussian(2), 100, SeedSpec())
    with pytest.raises(ValueError):
        wald_check(float("nan"), StoppingRule.fixed(3), gaussian(1), 100, SeedSpec())


def test_threshold_stop_times_monotone_in_level():
    t = threshold_stop_times(IncrementModel("laplace", 3), [0.5, 1.0, 2.0, 4.0], 60, 3000, SeedSpec(4))
    assert t.shape == (4, 3000)
    assert np.all(np.diff(t, axis=0) >= 0) and t.max() <= 60 and t.min() >= 1
