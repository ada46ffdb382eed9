"""Selection premium ``phi_K(u) = E[max_k(u_k + Y_k)] - max_k u_k`` and g(K)."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate, special

from . import _backend, _rng
from .increments import IncrementModel, SeedSpec, cholesky_factor

ESTIMATORS = ("mc", "exact_clark", "quadrature")
DEFAULT_REPLICAS = 100_000


@dataclass(frozen=True)
class PremiumEstimate:
    """A premium (or expected maximum) value with its standard error."""

    value: float
    std_error: float
    replicas: int
    estimator: str

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.std_error < 0:
            raise ValueError("std_error must be non-negative")

    def scaled(self, factor: float) -> "PremiumEstimate":
        return PremiumEstimate(self.value * factor, self.std_error * abs(factor), self.replicas, self.estimator)


def _as_state(u, model: IncrementModel) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    if u.ndim != 1 or u.shape[0] != model.k:
        raise ValueError(f"state has length {u.shape[0] if u.ndim == 1 else u.shape}, model has K={model.k}")
    if not np.all(np.isfinite(u)):
        raise ValueError("state entries must be finite")
    return u


def premium_replicas(u, model: IncrementModel, replicas: int, seed: SeedSpec) -> np.ndarray:
    """Per-replica values ``max_k(u_k + Y_k) - max_k u_k``.

    Computed as ``max_k((u_k - max u) + Y_k)``, so shifting ``u`` by a constant
    that keeps the gaps exact leaves every replica bit-identical, and each
    replica is ``<=`` the corresponding replica at ``u = 0``.
    """
    u = _as_state(u, model)
    if int(replicas) != replicas or replicas < 1:
        raise ValueError("replicas must be a positive integer")
    gaps = u - np.max(u)
    key = _rng.step_key(_rng.path_key(_rng.root_key(seed.root_seed), seed.path), seed.step)
    out = np.empty(int(replicas))
    _backend.kernels().premium_replicas(*model.kernel_args(), gaps, np.uint64(key),
                                        seed.replica, int(replicas), out)
    return out


def premium_mc(u, model: IncrementModel, replicas: int = DEFAULT_REPLICAS,
               seed: SeedSpec = SeedSpec()) -> PremiumEstimate:
    """Monte Carlo estimate of the selection premium at state ``u``."""
    if replicas < 2:
        raise ValueError("premium_mc needs at least 2 replicas")
    vals = premium_replicas(u, model, replicas, seed)
    return PremiumEstimate(float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(replicas)),
                           int(replicas), "mc")


def premium_enumerated(u, model: IncrementModel) -> Fraction:
    """Exact premium for independent rademacher increments by enumerating all ``2**K`` signs.

    Entries of ``u`` and the scales are converted to exact binary fractions,
    so the result is the exact premium of the floating-point inputs.
    """
    if model.family != "rademacher" or model.correlation_mode != _rng.INDEPENDENT:
        raise ValueError("enumeration needs independent rademacher increments")
    if model.k > 16:
        raise ValueError("enumeration limited to K <= 16")
    u = [Fraction(float(x)) for x in _as_state(u, model)]
    s = [Fraction(x) for x in model.scales]
    top = max(u)
    total = Fraction(0)
    for signs in itertools.product((-1, 1), repeat=model.k):
        total += max(a + e * b for a, e, b in zip(u, signs, s))
    return total / 2 ** model.k - top


def clark_expected_max(u, cov) -> float:
    """``E[max(u_1 + Z_1, u_2 + Z_2)]`` for ``Z ~ N(0, cov)``, bivariate."""
    u = np.asarray(u, dtype=np.float64)
    C = np.asarray(cov, dtype=np.float64)
    if u.shape != (2,) or C.shape != (2, 2):
        raise ValueError("Clark's formula needs a length-2 state and a 2x2 covariance")
    cholesky_factor(C)
    theta2 = C[0, 0] + C[1, 1] - 2.0 * C[0, 1]
    if theta2 <= 1e-300:
        return float(max(u[0], u[1]))
    theta = math.sqrt(theta2)
    x = (u[0] - u[1]) / theta
    return float(u[0] * special.ndtr(x) + u[1] * special.ndtr(-x) + theta * math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi))


def premium_exact_2(u, cov) -> PremiumEstimate:
    """Closed-form premium for a bivariate Gaussian increment."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (2,):
        raise ValueError("premium_exact_2 needs a length-2 state")
    # evaluated at the gaps u - max(u), whose maximum is exactly 0
    value = clark_expected_max(u - np.max(u), cov)
    return PremiumEstimate(value, 0.0, 0, "exact_clark")


def g_normal(k: int, tolerance: float = 1e-8) -> PremiumEstimate:
    """``E[max of k i.i.d. N(0,1)] = k * int x phi(x) Phi(x)^(k-1) dx``.

    Adaptive Gauss-Kronrod (QUADPACK) on the two half-lines; raises if the
    reported absolute error exceeds ``tolerance``.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"K must be a positive integer, got {k}")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if k == 1:
        return PremiumEstimate(0.0, 0.0, 0, "quadrature")

    def f(x):
        return k * x * math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi) * special.ndtr(x) ** (k - 1)

    total, err = 0.0, 0.0
    for lo, hi in ((-math.inf, 0.0), (0.0, math.inf)):
        v, e = integrate.quad(f, lo, hi, epsabs=tolerance / 4, epsrel=0.0, limit=500)
        total += v
        err += e
    if err > tolerance:
        raise ArithmeticError(f"quadrature error {err:.2e} exceeds tolerance {tolerance:.2e}")
    return PremiumEstimate(total, 0.0, 0, "quadrature")


def g_gaussian_mc(cov, replicas: int = DEFAULT_REPLICAS, seed: SeedSpec = SeedSpec()) -> PremiumEstimate:
    """Monte Carlo ``E[max_k Z_k]`` for ``Z ~ N(0, cov)``."""
    C = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    model = IncrementModel("gaussian", C.shape[0], cov=tuple(map(tuple, C)))
    return premium_mc(np.zeros(C.shape[0]), model, replicas, seed)
