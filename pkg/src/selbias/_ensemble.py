"""Block-parallel driver around the walk kernel.

Paths are cut into fixed blocks of ``_rng.BLOCK``; each block accumulates its
own per-step sums and the blocks are reduced in index order. The worker count
only changes scheduling, never the numbers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _backend, _rng
from .increments import IncrementModel, SeedSpec

RULE_FIXED = 0
RULE_THRESHOLD = 1
RULE_LEADER_GAP = 2


@dataclass
class WalkSummary:
    """Streaming summary of a (possibly stopped, possibly drifted) ensemble.

    Per-step arrays are indexed ``i - 1`` for steps ``i = 1..horizon`` and
    describe the stopped process ``M_{T ^ i}``. Per-path arrays hold the values
    at the stopping time ``T`` (``T = horizon`` for a fixed rule):
    ``max_at_stop`` is ``max_k R_{T,k}``, ``null_max_at_stop`` is
    ``max_k S_{T,k}`` and ``leader`` the lowest index attaining the former.
    """

    paths: int
    horizon: int
    mean_m: np.ndarray
    var_m: np.ndarray
    mean_d: np.ndarray
    var_d: np.ndarray
    cov_d_d1: np.ndarray
    nested_mean: Optional[np.ndarray]
    nested_var: Optional[np.ndarray]
    diff_mean: Optional[np.ndarray]
    diff_var: Optional[np.ndarray]
    stop_time: np.ndarray
    max_at_stop: np.ndarray
    null_max_at_stop: np.ndarray
    leader: np.ndarray
    nested_total: Optional[np.ndarray]
    checkpoints: np.ndarray
    checkpoint_max: np.ndarray
    final_state: Optional[np.ndarray] = None

    def se(self, var: np.ndarray) -> np.ndarray:
        return np.sqrt(var / self.paths)


def _moments(s, s2, n):
    mean = s / n
    var = np.maximum((s2 - s * mean) / (n - 1), 0.0)
    return mean, var


def run_walks(model: IncrementModel, horizon: int, paths: int, seed: SeedSpec, *,
              drift: Optional[Sequence[float]] = None, rule: int = RULE_FIXED,
              rule_c: float = 0.0, inner: int = 0, checkpoints: Sequence[int] = (),
              keep_state: bool = False, workers: int = 1) -> WalkSummary:
    """Run the walk kernel over all paths and reduce the per-block sums.

    ``keep_state`` stores each path's undrifted walk ``S_T`` (paths x K).
    """
    if int(horizon) != horizon or horizon < 1:
        raise ValueError(f"horizon must be a positive integer, got {horizon}")
    if int(paths) != paths or paths < 2:
        raise ValueError(f"need at least 2 paths, got {paths}")
    if inner < 0:
        raise ValueError("inner replica count must be non-negative")
    horizon, paths, inner = int(horizon), int(paths), int(inner)
    K = model.k
    drift_arr = np.zeros(K) if drift is None else np.asarray(drift, dtype=np.float64)
    if drift_arr.shape != (K,):
        raise ValueError(f"drift has shape {drift_arr.shape}, expected ({K},)")
    chk_steps = np.unique(np.asarray(checkpoints, dtype=np.int64))
    if chk_steps.size and (chk_steps[0] < 1 or chk_steps[-1] > horizon):
        raise ValueError("checkpoints must lie in 1..horizon")

    n_blocks = -(-paths // _rng.BLOCK)
    acc = np.zeros((n_blocks, 5, horizon))
    nacc = np.zeros((n_blocks, 4, horizon if inner else 1))
    t_out = np.zeros(paths, dtype=np.int64)
    m_out = np.zeros(paths)
    maxs_out = np.zeros(paths)
    khat_out = np.zeros(paths, dtype=np.int64)
    nest_out = np.zeros(paths)
    chk = np.zeros((paths, chk_steps.size))
    s_out = np.zeros((paths if keep_state else 0, K))

    kern = _backend.kernels()
    args = model.kernel_args()
    kroot = np.uint64(_rng.root_key(seed.root_seed))

    def run(b_lo, b_hi):
        kern.walk_blocks(*args, drift_arr, kroot, seed.path, paths, b_lo, b_hi, horizon,
                         int(rule), float(rule_c), inner, chk_steps, acc, nacc, t_out, m_out,
                         maxs_out, khat_out, nest_out, chk, s_out)

    if workers <= 1 or n_blocks == 1:
        run(0, n_blocks)
    else:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            list(pool.map(lambda b: run(b, b + 1), range(n_blocks)))

    tot = acc.sum(axis=0)
    mean_m, var_m = _moments(tot[0], tot[1], paths)
    mean_d, var_d = _moments(tot[2], tot[3], paths)
    cov_d_d1 = (tot[4] - tot[2] * mean_d[0]) / (paths - 1)
    nested_mean = nested_var = diff_mean = diff_var = None
    if inner:
        ntot = nacc.sum(axis=0)
        nested_mean, nested_var = _moments(ntot[0], ntot[1], paths)
        diff_mean, diff_var = _moments(ntot[2], ntot[3], paths)
    return WalkSummary(paths, horizon, mean_m, var_m, mean_d, var_d, cov_d_d1,
                       nested_mean, nested_var, diff_mean, diff_var,
                       t_out, m_out, maxs_out, khat_out,
                       nest_out if inner else None, chk_steps, chk,
                       s_out if keep_state else None)


def mean_se(x: np.ndarray) -> tuple:
    """Sample mean and its standard error."""
    x = np.asarray(x, dtype=np.float64)
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))
