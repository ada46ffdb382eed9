"""Stopped walks: ``E[M_T]`` against the sum of truncated premiums, and Wald at K=1."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _ensemble
from ._ensemble import mean_se, run_walks
from .decomposition import MIN_NESTED_REPLICAS, expected_max_from
from .increments import IncrementModel, SeedSpec
from .premium import PremiumEstimate

RULE_VARIANTS = ("fixed", "threshold", "leader_gap")


@dataclass(frozen=True)
class StoppingRule:
    """An adapted stopping rule with a hard cap.

    ``threshold`` stops at the first ``i`` with ``M_i >= level``;
    ``leader_gap`` at the first ``i`` where the leader leads the runner-up by
    at least ``level`` (with a single arm the gap is infinite, so it stops at
    once). Every rule stops at ``cap`` at the latest.
    """

    variant: str
    cap: int
    level: float = 0.0

    def __post_init__(self):
        if self.variant not in RULE_VARIANTS:
            raise ValueError(f"unknown stopping rule {self.variant!r}; expected one of {RULE_VARIANTS}")
        if self.cap is None or int(self.cap) != self.cap or self.cap < 1:
            raise ValueError(f"stopping rule needs a positive integer cap, got {self.cap}")
        if not math.isfinite(self.level):
            raise ValueError("rule level must be finite")
        object.__setattr__(self, "cap", int(self.cap))

    @classmethod
    def fixed(cls, n: int) -> "StoppingRule":
        return cls("fixed", n)

    @classmethod
    def threshold(cls, c: float, cap: int) -> "StoppingRule":
        return cls("threshold", cap, float(c))

    @classmethod
    def leader_gap(cls, gamma: float, cap: int) -> "StoppingRule":
        if gamma < 0:
            raise ValueError("leader gap must be non-negative")
        return cls("leader_gap", cap, float(gamma))

    @property
    def kernel_code(self) -> tuple:
        code = {"fixed": _ensemble.RULE_FIXED, "threshold": _ensemble.RULE_THRESHOLD,
                "leader_gap": _ensemble.RULE_LEADER_GAP}[self.variant]
        return code, self.level

    def stop_now(self, i: int, state) -> bool:
        """Decision at step ``i`` given the current (drifted) walk values."""
        state = np.asarray(state, dtype=np.float64)
        if i >= self.cap:
            return True
        top = float(np.max(state))
        if self.variant == "threshold":
            return top >= self.level
        if self.variant == "leader_gap":
            if state.size < 2:
                return True
            runner_up = float(np.partition(state, state.size - 2)[state.size - 2])
            return top - runner_up >= self.level
        return False

    def decide(self, prefix) -> bool:
        """Stop after ``S_1..S_i``? Only the observed prefix (shape ``(i, K)``) is consulted."""
        prefix = np.atleast_2d(np.asarray(prefix, dtype=np.float64))
        if prefix.shape[0] < 1:
            raise ValueError("decision needs at least one observed step")
        return self.stop_now(prefix.shape[0], prefix[-1])


@dataclass
class StoppedSummary:
    """Both sides of the stopped identity on common outer paths.

    ``gap`` is the mean per-path difference ``M_T - sum_i phi_hat_i`` and
    ``gap_se`` its standard error (the combined SE of the comparison).
    ``terms[i-1]`` estimates ``E[phi_K(S_{i-1}) 1{T >= i}]``.
    """

    rule: StoppingRule
    paths: int
    mean_t: float
    mean_t_se: float
    lhs: PremiumEstimate
    rhs: PremiumEstimate
    gap: float
    gap_se: float
    terms: np.ndarray
    terms_se: np.ndarray
    stop_times: np.ndarray

    def term(self, i: int) -> float:
        """Truncated premium at step ``i``; zero beyond the cap."""
        if i < 1:
            raise ValueError("steps start at 1")
        return float(self.terms[i - 1]) if i <= self.rule.cap else 0.0


def simulate_stopped(model: IncrementModel, rule: StoppingRule, paths: int, seed: SeedSpec,
                     inner_replicas: int, workers: int = 1) -> StoppedSummary:
    """Estimate ``E[M_T]`` and the sum of truncated premiums on the same paths.

    The inner replicas at step ``i`` are fresh draws of the step-``i``
    increment, never the one the outer path goes on to use.
    """
    if inner_replicas < MIN_NESTED_REPLICAS:
        raise ValueError(f"inner_replicas must be at least {MIN_NESTED_REPLICAS}")
    code, level = rule.kernel_code
    summ = run_walks(model, rule.cap, paths, seed, rule=code, rule_c=level,
                     inner=int(inner_replicas), workers=workers)
    t_mean, t_se = mean_se(summ.stop_time)
    rhs_mean, rhs_se = mean_se(summ.nested_total)
    gap, gap_se = mean_se(summ.max_at_stop - summ.nested_total)
    return StoppedSummary(
        rule=rule, paths=summ.paths, mean_t=t_mean, mean_t_se=t_se,
        lhs=expected_max_from(summ),
        rhs=PremiumEstimate(rhs_mean, rhs_se, summ.paths, "mc"),
        gap=gap, gap_se=gap_se,
        terms=summ.nested_mean.copy(), terms_se=summ.se(summ.nested_var),
        stop_times=summ.stop_time,
    )


@dataclass(frozen=True)
class WaldReport:
    """``E[S_T]`` for the uncentered walk next to ``mu E[T]``, with their paired difference."""

    mu: float
    sum_mean: float
    sum_se: float
    drift_mean: float
    drift_se: float
    diff: float
    diff_se: float


def wald_check(mu: float, rule: StoppingRule, model: IncrementModel, paths: int,
               seed: SeedSpec, workers: int = 1) -> WaldReport:
    """Single walk with increments ``Y + mu``, stopped by ``rule``."""
    if model.k != 1:
        raise ValueError(f"the Wald reduction needs K=1, got K={model.k}")
    if not math.isfinite(mu):
        raise ValueError("mu must be finite")
    code, level = rule.kernel_code
    # the kernel tracks S_i - i*drift, so drift = -mu gives the uncentered walk
    summ = run_walks(model, rule.cap, paths, seed, drift=[-float(mu)], rule=code, rule_c=level,
                     workers=workers)
    s_t = summ.max_at_stop
    mu_t = mu * summ.stop_time
    a, a_se = mean_se(s_t)
    b, b_se = mean_se(mu_t)
    d, d_se = mean_se(s_t - mu_t)
    return WaldReport(float(mu), a, a_se, b, b_se, d, d_se)


# ---------------------------------------------------------------------------
# exact oracle for +-1 increments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactStopped:
    lhs: float
    rhs: float
    mean_t: float
    terms: tuple


def _sign_outcomes(k: int):
    if k == 1:
        return [(-1,), (1,)]
    return [(a, b) for a in (-1, 1) for b in (-1, 1)]


def _phi_lattice(state, outcomes) -> float:
    top = max(state)
    return sum(max(s + y for s, y in zip(state, ys)) for ys in outcomes) / len(outcomes) - top


def _check_exact_args(rule: StoppingRule, k: int):
    if k not in (1, 2):
        raise ValueError("the exact oracle covers K = 1 or 2")
    if rule.cap > 20:
        raise ValueError("the exact oracle is limited to cap <= 20")


def exact_stopped_forward(rule: StoppingRule, k: int = 2) -> ExactStopped:
    """Forward distribution recursion over the +-1 lattice.

    Propagates the law of the still-running state; mass that stops at step
    ``i`` contributes ``M_i`` to the left side, and the running mass at
    ``i - 1`` contributes ``phi_K`` to the ``i``-th truncated term.
    """
    _check_exact_args(rule, k)
    outcomes = _sign_outcomes(k)
    p = 1.0 / len(outcomes)
    alive = {(0,) * k: 1.0}
    lhs = 0.0
    mean_t = 0.0
    terms = []
    for i in range(1, rule.cap + 1):
        terms.append(sum(w * _phi_lattice(s, outcomes) for s, w in alive.items()))
        nxt = {}
        for s, w in alive.items():
            for ys in outcomes:
                t = tuple(a + b for a, b in zip(s, ys))
                nxt[t] = nxt.get(t, 0.0) + w * p
        alive = {}
        for s, w in sorted(nxt.items()):
            if rule.stop_now(i, s):
                lhs += w * max(s)
                mean_t += w * i
            else:
                alive[s] = w
    return ExactStopped(lhs, math.fsum(terms), mean_t, tuple(terms))


def exact_stopped_backward(rule: StoppingRule, k: int = 2) -> tuple:
    """Backward value recursion; returns ``(E[M_T], sum of truncated premiums)``.

    ``V(i, s)`` is ``E[M_T]`` and ``W(i, s)`` the expected remaining premium
    sum, both for a walk still running at state ``s`` after step ``i``.
    """
    _check_exact_args(rule, k)
    outcomes = _sign_outcomes(k)
    p = 1.0 / len(outcomes)
    memo = {}

    def vw(i, s):
        key = (i, s)
        if key in memo:
            return memo[key]
        v = 0.0
        w = _phi_lattice(s, outcomes)
        for ys in outcomes:
            t = tuple(a + b for a, b in zip(s, ys))
            if rule.stop_now(i + 1, t):
                v += p * max(t)
            else:
                vt, wt = vw(i + 1, t)
                v += p * vt
                w += p * wt
        memo[key] = (v, w)
        return v, w

    return vw(0, (0,) * k)


def threshold_stop_times(model: IncrementModel, levels, cap: int, paths: int, seed: SeedSpec,
                         workers: int = 1) -> np.ndarray:
    """Per-path threshold stopping times, one row per level, on common paths."""
    rows = []
    for c in levels:
        summ = run_walks(model, cap, paths, seed, rule=_ensemble.RULE_THRESHOLD, rule_c=float(c),
                         workers=workers)
        rows.append(summ.stop_time.copy())
    return np.array(rows)
