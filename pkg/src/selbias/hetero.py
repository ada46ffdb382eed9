"""Unequal means: drift plus drifted premiums, optimism of the winner, null-case domination."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._ensemble import WalkSummary, mean_se, run_walks
from .decomposition import EnsembleConfig, ProfileReport, expected_max_from, profile_from
from .increments import IncrementModel, SeedSpec
from .premium import PremiumEstimate


@dataclass(frozen=True)
class MeanVector:
    """True model means; ``best`` is the lowest index attaining the maximum."""

    mu: tuple

    def __post_init__(self):
        mu = tuple(float(m) for m in np.atleast_1d(np.asarray(self.mu, dtype=np.float64)))
        if not mu or not all(np.isfinite(mu)):
            raise ValueError("means must be a non-empty vector of finite reals")
        object.__setattr__(self, "mu", mu)

    @property
    def k(self) -> int:
        return len(self.mu)

    @property
    def best(self) -> int:
        return int(np.argmax(self.mu))

    @property
    def gaps(self) -> np.ndarray:
        mu = np.array(self.mu)
        return mu[self.best] - mu

    @property
    def unique(self) -> bool:
        return int(np.sum(np.array(self.mu) == self.mu[self.best])) == 1


def _as_means(means, k: int) -> MeanVector:
    m = means if isinstance(means, MeanVector) else MeanVector(tuple(np.atleast_1d(means)))
    if m.k != k:
        raise ValueError(f"means have length {m.k}, model has K={k}")
    return m


def _run(config: EnsembleConfig, means: MeanVector, keep_state: bool = True) -> WalkSummary:
    return run_walks(config.model, config.horizon, config.paths, config.seed, drift=means.gaps,
                     inner=config.inner, keep_state=keep_state, workers=config.workers)


def _selected(summary: WalkSummary, means: MeanVector) -> np.ndarray:
    n = summary.horizon
    s_bar = summary.final_state + n * np.array(means.mu)
    return np.argmax(s_bar, axis=1)


def _optimism_from(summary: WalkSummary, khat: np.ndarray) -> PremiumEstimate:
    S = summary.final_state
    n = summary.horizon
    # S_{n,khat}/n with the cross-arm mean as a zero-mean control variate
    vals = (S[np.arange(S.shape[0]), khat] - S.mean(axis=1)) / n
    m, se = mean_se(vals)
    return PremiumEstimate(m, se, summary.paths, "mc")


@dataclass
class CurseReport:
    """Winner's-curse decomposition on one ensemble of drifted walks.

    ``expected_max_bar`` is defined as ``drift + expected_max_r``; the per-path
    version of that identity is checked by :func:`curse_identity_residual`.
    """

    n: int
    means: MeanVector
    drift: float
    expected_max_r: PremiumEstimate
    expected_max_bar: PremiumEstimate
    profile: ProfileReport
    optimism: PremiumEstimate
    selected_counts: np.ndarray

    @property
    def selected_freq(self) -> np.ndarray:
        return self.selected_counts / self.selected_counts.sum()


def winners_curse(config: EnsembleConfig, means) -> CurseReport:
    """Drift ``n mu_best`` plus the telescoped premiums of ``R_i = S_i - i*gaps``."""
    means = _as_means(means, config.model.k)
    summ = _run(config, means)
    n = config.horizon
    e_r = expected_max_from(summ)
    drift = n * means.mu[means.best]
    khat = _selected(summ, means)
    return CurseReport(
        n=n, means=means, drift=drift, expected_max_r=e_r,
        expected_max_bar=PremiumEstimate(drift + e_r.value, e_r.std_error, e_r.replicas, "mc"),
        profile=profile_from(summ, config.model),
        optimism=_optimism_from(summ, khat),
        selected_counts=np.bincount(khat, minlength=means.k),
    )


def curse_identity_residual(config: EnsembleConfig, means) -> np.ndarray:
    """Per-path ``max_k S_bar - n mu_best - max_k R``."""
    means = _as_means(means, config.model.k)
    summ = _run(config, means)
    n = config.horizon
    s_bar = summ.final_state + n * np.array(means.mu)
    return np.max(s_bar, axis=1) - n * means.mu[means.best] - summ.max_at_stop


def optimism(config: EnsembleConfig, means) -> PremiumEstimate:
    """Estimate of ``E[S_bar_{n,khat}/n - mu_khat] = E[S_{n,khat}]/n``.

    Subtracting the cross-arm mean of ``S_n`` (expectation zero) leaves the
    target unchanged, lowers the variance, and makes the K=1 estimate exactly 0.
    """
    means = _as_means(means, config.model.k)
    summ = _run(config, means)
    return _optimism_from(summ, _selected(summ, means))


@dataclass(frozen=True)
class DominationCheck:
    """``E[max R_n]`` against ``E[max S_n]`` on common random numbers."""

    drifted: PremiumEstimate
    null: PremiumEstimate
    paths_dominated: int
    paths: int

    @property
    def fraction_dominated(self) -> float:
        return self.paths_dominated / self.paths


def hetero_bounds_check(config: EnsembleConfig, means) -> DominationCheck:
    """Both maxima come from the same increments, so ``max R <= max S`` path by path."""
    means = _as_means(means, config.model.k)
    summ = _run(config, means, keep_state=False)
    r, r_se = mean_se(summ.max_at_stop)
    s, s_se = mean_se(summ.null_max_at_stop)
    ok = int(np.sum(summ.max_at_stop <= summ.null_max_at_stop))
    return DominationCheck(PremiumEstimate(r, r_se, summ.paths, "mc"),
                           PremiumEstimate(s, s_se, summ.paths, "mc"), ok, summ.paths)


@dataclass(frozen=True)
class CurvePoint:
    n: int
    value: float
    std_error: float


def per_observation_premium_curve(model: IncrementModel, n_grid: Sequence[int], means, paths: int,
                                  seed: SeedSpec = SeedSpec(), workers: int = 1) -> list:
    """``E[max_k R_{n,k}] / n`` along ``n_grid`` from one ensemble run to ``max(n_grid)``."""
    means = _as_means(means, model.k)
    if not means.unique:
        raise ValueError("the per-observation premium curve needs a unique best model")
    grid = sorted({int(n) for n in n_grid})
    if not grid or grid[0] < 1:
        raise ValueError("n grid must contain positive integers")
    summ = run_walks(model, grid[-1], paths, seed, drift=means.gaps, checkpoints=grid, workers=workers)
    out = []
    for j, n in enumerate(grid):
        m, se = mean_se(summ.checkpoint_max[:, j] / n)
        out.append(CurvePoint(n, m, se))
    return out


def enumerate_max_uncentered(means: Sequence[int], n: int) -> Fraction:
    """Exact ``E[max_k S_bar_{n,k}]`` for independent +-1 increments and integer means.

    Enumerates all ``2**(n*K)`` sign sequences; intended for ``n*K <= 16``.
    """
    k = len(means)
    if n * k > 16:
        raise ValueError("enumeration limited to n*K <= 16")
    total = Fraction(0)
    for signs in itertools.product((-1, 1), repeat=n * k):
        sums = [sum(signs[j * k + a] for j in range(n)) for a in range(k)]
        total += max(s + n * m for s, m in zip(sums, means))
    return total / (2 ** (n * k))
