"""Expected maximum of coupled walks, its per-step premium profile, and bounds.

The telescoping estimator takes per-path increments ``D_i = M_i - M_{i-1}``
on shared paths; the nested estimator re-estimates ``phi_K(S_{i-1})`` with
fresh inner draws at each visited state. Only their agreement tests the
decomposition, since the telescoping sum is an identity of the estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Union

import numpy as np
from scipy import optimize

from . import _rng
from ._ensemble import WalkSummary, mean_se, run_walks
from .increments import IncrementModel, SeedSpec
from .premium import PremiumEstimate, premium_mc

MIN_NESTED_REPLICAS = 100
ANALYTIC_GAUSSIAN = "analytic_gaussian"
ENVELOPE_FAMILIES = ("gaussian", "uniform_centered", "rademacher")


@dataclass(frozen=True)
class EnsembleConfig:
    """An ensemble of ``paths`` independent K-arm walks run to ``horizon``."""

    model: IncrementModel
    horizon: int
    paths: int
    seed: SeedSpec = SeedSpec()
    nested_inner_replicas: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon}")
        if int(self.paths) != self.paths or self.paths < 2:
            raise ValueError(f"need at least 2 paths, got {self.paths}")
        if self.nested_inner_replicas is not None and self.nested_inner_replicas < 1:
            raise ValueError("nested_inner_replicas must be positive when given")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @property
    def inner(self) -> int:
        return int(self.nested_inner_replicas or 0)


def simulate_ensemble(config: EnsembleConfig, *, drift=None, checkpoints: Sequence[int] = ()) -> WalkSummary:
    """Streaming per-step moments of ``M_i`` (and nested premiums if configured)."""
    return run_walks(config.model, config.horizon, config.paths, config.seed, drift=drift,
                     inner=config.inner, checkpoints=checkpoints, workers=config.workers)


def _telescoped(summary: WalkSummary) -> np.ndarray:
    # expected_max is defined as the running sum of the per-step premiums
    return np.cumsum(summary.mean_d)


def expected_max_from(summary: WalkSummary) -> PremiumEstimate:
    value = float(_telescoped(summary)[-1])
    return PremiumEstimate(value, float(summary.se(summary.var_m)[-1]), summary.paths, "mc")


def expected_max(config: EnsembleConfig) -> PremiumEstimate:
    """``E[M_n]`` at the configured horizon."""
    return expected_max_from(simulate_ensemble(
        EnsembleConfig(config.model, config.horizon, config.paths, config.seed, None, config.workers)))


@dataclass
class ProfileReport:
    """Per-step premiums and everything derived from them.

    Arrays are indexed ``i - 1`` for ``i = 1..n``. ``nested_diff_se`` is the
    standard error of the per-path paired difference between the telescoping
    and nested estimates; ``total_gap`` compares ``M_n`` with the summed
    nested premiums path by path.
    """

    family: str
    k: int
    horizon: int
    paths: int
    premium: np.ndarray
    premium_se: np.ndarray
    expected_max: np.ndarray
    expected_max_se: np.ndarray
    premium_cov_first: np.ndarray
    nested: Optional[np.ndarray] = None
    nested_se: Optional[np.ndarray] = None
    nested_diff: Optional[np.ndarray] = None
    nested_diff_se: Optional[np.ndarray] = None
    total_gap: Optional[float] = None
    total_gap_se: Optional[float] = None
    psi: Optional[np.ndarray] = None
    psi_se: Optional[np.ndarray] = None
    decay: Dict[float, Optional[int]] = field(default_factory=dict)

    @property
    def steps(self) -> np.ndarray:
        return np.arange(1, self.horizon + 1)


def profile_from(summary: WalkSummary, model: IncrementModel, alphas: Sequence[float] = ()) -> ProfileReport:
    rep = ProfileReport(
        family=model.family, k=model.k, horizon=summary.horizon, paths=summary.paths,
        premium=summary.mean_d.copy(), premium_se=summary.se(summary.var_d),
        expected_max=_telescoped(summary), expected_max_se=summary.se(summary.var_m),
        premium_cov_first=summary.cov_d_d1.copy(),
    )
    if summary.nested_mean is not None:
        rep.nested = summary.nested_mean.copy()
        rep.nested_se = summary.se(summary.nested_var)
        rep.nested_diff = summary.diff_mean.copy()
        rep.nested_diff_se = summary.se(summary.diff_var)
        rep.total_gap, rep.total_gap_se = mean_se(summary.max_at_stop - summary.nested_total)
    if rep.premium[0] > 3.0 * rep.premium_se[0]:
        rep.psi, rep.psi_se = normalized_profile(rep)
        rep.decay = {float(a): decay_time(rep, a) for a in alphas}
    return rep


def premium_profile(config: EnsembleConfig, alphas: Sequence[float] = (0.1,)) -> ProfileReport:
    """Per-step premiums by telescoping, plus nested estimates when configured.

    ``psi`` and the decay table are filled in when the step-1 premium is
    clearly positive (more than 3 standard errors).
    """
    if config.nested_inner_replicas is not None and config.inner < MIN_NESTED_REPLICAS:
        raise ValueError(f"nested estimation needs at least {MIN_NESTED_REPLICAS} inner replicas")
    return profile_from(simulate_ensemble(config), config.model, alphas)


def nested_premium(config: EnsembleConfig) -> ProfileReport:
    """Premium profile whose nested fields are guaranteed to be present."""
    if config.nested_inner_replicas is None:
        raise ValueError("nested_premium needs nested_inner_replicas")
    return premium_profile(config, alphas=())


def normalized_profile(report: ProfileReport) -> tuple:
    """``psi[i] = premium[i] / premium[1]`` with delta-method standard errors.

    Raises
    ------
    ValueError
        If ``premium[1]`` is within 3 standard errors of zero.
    """
    p, se = report.premium, report.premium_se
    if not p[0] > 3.0 * se[0]:
        raise ValueError(
            f"step-1 premium {p[0]:.3g} is not separated from 0 (SE {se[0]:.3g}); psi is undefined")
    psi = p / p[0]
    psi[0] = 1.0
    n = report.paths
    var_d1 = se[0] ** 2 * n
    var = (se ** 2 * n - 2.0 * psi * report.premium_cov_first + psi ** 2 * var_d1) / (p[0] ** 2)
    psi_se = np.sqrt(np.maximum(var, 0.0) / n)
    psi_se[0] = 0.0
    return psi, psi_se


def gaussian_psi(i) -> np.ndarray:
    """``sqrt(i) - sqrt(i-1)``, evaluated as ``1 / (sqrt(i) + sqrt(i-1))``."""
    i = np.asarray(i, dtype=np.float64)
    return 1.0 / (np.sqrt(i) + np.sqrt(i - 1.0))


def decay_time(source: Union[str, ProfileReport], alpha: float) -> Optional[int]:
    """First step ``i`` with ``psi(i) < alpha``; ``None`` if not reached by the horizon.

    ``source`` is ``"analytic_gaussian"`` or a :class:`ProfileReport`; the
    empirical profile is first smoothed by weighted isotonic (nonincreasing)
    regression.

    >>> decay_time("analytic_gaussian", 0.1)
    26
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if isinstance(source, str):
        if source != ANALYTIC_GAUSSIAN:
            raise ValueError(f"unknown decay source {source!r}")
        # psi(i) < alpha needs 2*sqrt(i) > 1/alpha, so nothing below 1/(4 alpha^2) qualifies
        i = max(1, int(math.floor(1.0 / (4.0 * alpha * alpha))))
        while not gaussian_psi(i) < alpha:
            i += 1
        return i
    if source.psi is None:
        raise ValueError("report has no normalized profile (step-1 premium not separated from 0)")
    smooth = smoothed_psi(source)
    hits = np.flatnonzero(smooth < alpha)
    return int(hits[0]) + 1 if hits.size else None


def smoothed_psi(report: ProfileReport) -> np.ndarray:
    """Weighted nonincreasing isotonic fit of ``psi`` (weights ``1/SE^2``)."""
    psi, se = report.psi, report.psi_se
    w = np.empty_like(psi)
    rest = se[1:]
    w[1:] = 1.0 / np.maximum(rest, 1e-12) ** 2
    w[0] = 1e3 * (w[1:].max() if psi.size > 1 else 1.0)  # psi(1) = 1 is exact
    return optimize.isotonic_regression(psi, weights=w, increasing=False).x


@dataclass(frozen=True)
class ConcentrationPoint:
    alpha: float
    step: int
    ratio: float
    std_error: float


def _alpha_step(alpha: float, n: int) -> int:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    step = int(math.floor(alpha * n + 1e-9))
    if step < 1:
        raise ValueError(f"floor(alpha*n) is 0 for alpha={alpha}, n={n}")
    return step


def bias_concentration(config: EnsembleConfig, alphas: Sequence[float]) -> list:
    """Ratios ``E[M_floor(alpha n)] / E[M_n]`` with delta-method standard errors."""
    n = config.horizon
    steps = [_alpha_step(a, n) for a in alphas]
    summ = run_walks(config.model, n, config.paths, config.seed, checkpoints=steps + [n],
                     workers=config.workers)
    cols = {int(s): j for j, s in enumerate(summ.checkpoints)}
    mn = summ.checkpoint_max[:, cols[n]]
    mu_n = mn.mean()
    out = []
    for a, s in zip(alphas, steps):
        ma = summ.checkpoint_max[:, cols[s]]
        if s == n:
            out.append(ConcentrationPoint(float(a), s, 1.0, 0.0))
            continue
        mu_a = ma.mean()
        r = mu_a / mu_n
        c = np.cov(ma, mn)
        var = (c[0, 0] - 2.0 * r * c[0, 1] + r * r * c[1, 1]) / (mu_n * mu_n)
        out.append(ConcentrationPoint(float(a), s, float(r), math.sqrt(max(var, 0.0) / summ.paths)))
    return out


def gaussian_concentration_ratio(alpha: float, n: Optional[int] = None) -> float:
    """Gaussian ``E[M_floor(alpha n)] / E[M_n]``; ``sqrt(alpha)`` when ``n`` is omitted."""
    if n is None:
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
        return math.sqrt(alpha)
    return math.sqrt(_alpha_step(alpha, n) / n)


def subgaussian_envelope(n: float, k: int, lam_max: float) -> float:
    """``sqrt(2 n lam_max log K)`` with the natural logarithm."""
    if n < 1 or k < 1 or lam_max < 0:
        raise ValueError("need n >= 1, K >= 1 and lam_max >= 0")
    return math.sqrt(2.0 * n * lam_max * math.log(k))


def crude_upper_bound(n: int, model: IncrementModel, replicas: int, seed: SeedSpec) -> PremiumEstimate:
    """``n * E[max_k Y_k]`` with the Monte Carlo standard error scaled by ``n``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return premium_mc(np.zeros(model.k), model, replicas, seed).scaled(n)


@dataclass(frozen=True)
class BoundPoint:
    family: str
    k: int
    n: int
    mean: float
    std_error: float
    envelope: float
    crude: float
    crude_se: float

    @property
    def margin(self) -> float:
        return self.envelope - self.mean


@dataclass
class BoundReport:
    points: list

    def select(self, family: str, k: Optional[int] = None, n: Optional[int] = None) -> list:
        return [p for p in self.points if p.family == family
                and (k is None or p.k == k) and (n is None or p.n == n)]

    def slope(self, family: str, k: int) -> float:
        """Least-squares slope of ``log E[M_n]`` on ``log n`` at fixed K."""
        pts = self.select(family, k=k)
        x = np.log([p.n for p in pts])
        y = np.log([p.mean for p in pts])
        return float(np.polyfit(x, y, 1)[0])


def envelope_sweep(n_grid: Sequence[int], k_grid: Sequence[int], families: Sequence[str],
                   paths: int, seed: SeedSpec = SeedSpec(), crude_replicas: int = 100_000,
                   workers: int = 1) -> BoundReport:
    """``E[M_n]`` over an (n, K, family) grid next to the envelope and crude bound.

    One ensemble per (family, K) runs to ``max(n_grid)`` and is read off at
    every grid point. Each (family, K) cell uses its own derived seed.
    """
    n_grid = sorted({int(n) for n in n_grid})
    if not n_grid or n_grid[0] < 1:
        raise ValueError("n grid must contain positive integers")
    points = []
    for fam in families:
        if fam not in ENVELOPE_FAMILIES:
            raise ValueError(f"envelope needs a unit sub-Gaussian family {ENVELOPE_FAMILIES}, got {fam!r}")
        for k in k_grid:
            model = IncrementModel(fam, int(k))
            lam = float(np.linalg.eigvalsh(model.covariance())[-1])
            cell = seed.derive(_rng.FAMILY_CODES[fam] * 1_000_003 + int(k))
            summ = run_walks(model, n_grid[-1], paths, cell, checkpoints=n_grid, workers=workers)
            crude1 = premium_mc(np.zeros(model.k), model, crude_replicas, cell.derive(1))
            for j, n in enumerate(n_grid):
                m, se = mean_se(summ.checkpoint_max[:, j])
                points.append(BoundPoint(fam, int(k), n, m, se, subgaussian_envelope(n, int(k), lam),
                                         crude1.value * n, crude1.std_error * n))
    return BoundReport(points)
