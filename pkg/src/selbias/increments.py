"""Centered multivariate increment laws and the reproducible random stream."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _backend, _rng

FAMILIES = tuple(_rng.FAMILY_CODES)
BOUNDED_FAMILIES = ("uniform_centered", "rademacher")


class NotPSDError(ValueError):
    """Raised for a covariance matrix with a materially negative eigenvalue."""

    def __init__(self, minor: int, eigenvalue: float):
        self.minor = minor
        self.eigenvalue = eigenvalue
        super().__init__(
            f"matrix is not positive semi-definite: leading minor of order {minor} "
            f"has eigenvalue {eigenvalue:.3g}"
        )


@dataclass(frozen=True)
class Standardization:
    """How a family's base variate is shifted and scaled to mean 0, variance 1.

    ``support`` is the half-width of the standardized support for bounded
    families and ``None`` otherwise.
    """

    family: str
    base: str
    shift: float
    scale: float
    support: Optional[float]


_STANDARDIZATION = {
    "gaussian": Standardization("gaussian", "N(0,1)", 0.0, 1.0, None),
    "student_t5": Standardization("student_t5", "t(5)", 0.0, _rng.SQRT_3_5, None),
    "exponential_centered": Standardization("exponential_centered", "Exp(1)", -1.0, 1.0, None),
    "uniform_centered": Standardization("uniform_centered", "U(-1,1)", 0.0, _rng.SQRT3, _rng.SQRT3),
    "laplace": Standardization("laplace", "Laplace(0,1)", 0.0, _rng.SQRT_HALF, None),
    "rademacher": Standardization("rademacher", "{-1,+1}", 0.0, 1.0, 1.0),
}


def standardize(family: str) -> Standardization:
    """Centering/scaling constants giving a unit-variance, mean-zero marginal.

    >>> standardize("student_t5").scale ** 2
    0.6000000000000001
    """
    try:
        return _STANDARDIZATION[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}") from None


def cholesky_factor(sigma, tol: float = 1e-10) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == sigma``.

    Semi-definite input is accepted: a pivot within ``tol * max(diag)`` of zero
    yields a zero column. Any eigenvalue below ``-1e-8`` raises
    :class:`NotPSDError` naming the first leading minor that fails.
    """
    A = np.array(sigma, dtype=np.float64, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"covariance must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("covariance has non-finite entries")
    scale = max(float(np.max(np.abs(A))), 1.0) if A.size else 1.0
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError("covariance must be symmetric")
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    if n and np.linalg.eigvalsh(A)[0] < -1e-8:
        for m in range(1, n + 1):
            lam = np.linalg.eigvalsh(A[:m, :m])[0]
            if lam < -1e-8:
                raise NotPSDError(m, float(lam))
    L = np.zeros_like(A)
    thresh = tol * (float(np.max(np.diag(A))) if n else 0.0)
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if d <= thresh:
            continue
        L[j, j] = math.sqrt(d)
        L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


@dataclass(frozen=True)
class SeedSpec:
    """Root seed plus base stream coordinates.

    A draw is addressed by ``(root_seed, path, step, replica)``; estimators add
    their own offsets to the base coordinates, so distinct triples never share
    random words and the result does not depend on execution order.
    """

    root_seed: int = 0
    path: int = 0
    step: int = 0
    replica: int = 0

    def __post_init__(self):
        _rng.root_key(self.root_seed)
        if min(self.path, self.step, self.replica) < 0:
            raise ValueError("stream coordinates must be non-negative")

    def derive(self, tag: int) -> "SeedSpec":
        """An independent root for a sub-experiment identified by ``tag``."""
        return SeedSpec(_rng.mix64(_rng.mix64(self.root_seed) ^ (tag * _rng.GOLDEN)),
                        self.path, self.step, self.replica)


@dataclass(frozen=True)
class IncrementModel:
    """A centered K-dimensional increment law.

    Correlation is one of: independent (default), exchangeable ``rho`` built as
    ``sqrt(rho)*W + sqrt(1-rho)*V_k`` from standardized family draws, or a full
    covariance matrix ``cov`` (gaussian only; ``scales`` then come from its
    diagonal). For non-gaussian families the exchangeable mixture is not itself
    a member of the family.
    """

    family: str
    k: int
    scales: tuple = ()
    rho: Optional[float] = None
    cov: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        standardize(self.family)
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"arm count must be a positive integer, got {self.k}")
        if self.cov is not None:
            if self.family != "gaussian":
                raise ValueError("a full covariance matrix is only supported for the gaussian family")
            if self.rho is not None:
                raise ValueError("give either rho or cov, not both")
            C = np.asarray(self.cov, dtype=np.float64)
            if C.shape != (self.k, self.k):
                raise ValueError(f"covariance shape {C.shape} does not match K={self.k}")
            cholesky_factor(C)
            object.__setattr__(self, "cov", tuple(map(tuple, C.tolist())))
            object.__setattr__(self, "scales", tuple(float(math.sqrt(max(v, 0.0))) for v in np.diag(C)))
            return
        scales = tuple(float(s) for s in np.broadcast_to(
            np.asarray(self.scales if len(self.scales) else (1.0,), dtype=np.float64), (self.k,)))
        if not all(s > 0 and math.isfinite(s) for s in scales):
            raise ValueError("scales must be positive and finite")
        object.__setattr__(self, "scales", scales)
        if self.rho is not None and not 0.0 <= float(self.rho) <= 1.0:
            raise ValueError(f"exchangeable correlation must lie in [0, 1], got {self.rho}")

    @property
    def correlation_mode(self) -> int:
        if self.cov is not None:
            return _rng.CHOLESKY
        if self.rho is not None and self.rho > 0.0 and self.k > 1:
            return _rng.EXCHANGEABLE
        return _rng.INDEPENDENT

    @property
    def slots(self) -> int:
        return self.k + (1 if self.correlation_mode == _rng.EXCHANGEABLE else 0)

    @property
    def support_bound(self) -> Optional[float]:
        c = standardize(self.family).support
        if c is None:
            return None
        smax = max(self.scales)
        if self.correlation_mode == _rng.EXCHANGEABLE:
            a, b = _mix_weights(self.rho)
            return smax * (a * c + b * c)
        return smax * c

    def covariance(self) -> np.ndarray:
        if self.cov is not None:
            return np.array(self.cov)
        s = np.array(self.scales)
        rho = self.rho if self.correlation_mode == _rng.EXCHANGEABLE else 0.0
        R = np.full((self.k, self.k), rho)
        np.fill_diagonal(R, 1.0)
        return R * np.outer(s, s)

    def kernel_args(self) -> tuple:
        """Positional parameters shared by every kernel entry point."""
        mode = self.correlation_mode
        a, b = _mix_weights(self.rho) if mode == _rng.EXCHANGEABLE else (0.0, 1.0)
        chol = cholesky_factor(np.array(self.cov)) if mode == _rng.CHOLESKY else np.zeros((1, 1))
        return (_rng.FAMILY_CODES[self.family], mode, self.k, self.slots,
                np.array(self.scales, dtype=np.float64), a, b, np.ascontiguousarray(chol))

    def to_dict(self) -> dict:
        d = {"family": self.family, "k": self.k, "scales": list(self.scales)}
        if self.rho is not None:
            d["rho"] = self.rho
        if self.cov is not None:
            d["cov"] = [list(r) for r in self.cov]
            d.pop("scales")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IncrementModel":
        cov = d.get("cov")
        return cls(d["family"], int(d["k"]), tuple(d.get("scales", ())) if cov is None else (),
                   d.get("rho"), None if cov is None else tuple(map(tuple, cov)))


def _mix_weights(rho: float) -> tuple:
    return math.sqrt(rho), math.sqrt(1.0 - rho)


def gaussian(k: int, sigma: float | Sequence[float] = 1.0, rho: Optional[float] = None) -> IncrementModel:
    return IncrementModel("gaussian", k, tuple(np.broadcast_to(sigma, (k,))), rho)


def sample_increments(model: IncrementModel, seed: SeedSpec, count: int) -> np.ndarray:
    """``count`` i.i.d. rows of Y drawn at ``(seed.path, seed.step)``.

    Row ``r`` is replica ``seed.replica + r``. The result (a DrawBatch: rows are
    replicas, columns are arms) is bit-identical for identical arguments.
    """
    if int(count) != count or count < 1:
        raise ValueError(f"count must be a positive integer, got {count}")
    key = _rng.step_key(_rng.path_key(_rng.root_key(seed.root_seed), seed.path), seed.step)
    out = np.empty((int(count), model.k))
    _backend.kernels().draw_batch(*model.kernel_args(), np.uint64(key), seed.replica, int(count), out)
    return out
