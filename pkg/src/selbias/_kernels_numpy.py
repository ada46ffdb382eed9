"""Pure-numpy kernels, vectorised over the paths of one block.

Same signatures and the same random stream as ``_kernels_numba``.
"""

from __future__ import annotations

import numpy as np

from . import _rng

# cap on keys*replicas*slots words materialised at once
_CHUNK_WORDS = 1 << 21


def _draw_slots(fam, slots, keys, r0, count):
    """Standardized coordinates, shape ``(len(keys), count, slots)``."""
    reps = np.arange(r0, r0 + count, dtype=np.int64)
    s = np.arange(slots, dtype=np.int64)
    if fam == _rng.RADEMACHER:
        b = (reps[:, None] * slots + s[None, :]).astype(np.uint64)
        w = _rng.words_np(keys, b >> np.uint64(6))
        bits = (w >> (b & np.uint64(63))) & np.uint64(1)
        return bits.astype(np.float64) * 2.0 - 1.0
    if fam == _rng.STUDENT_T5:
        base = (reps[:, None] * slots + s[None, :]) * 4
        z1 = _rng.normal_np(keys, base)
        z2 = _rng.normal_np(keys, base + 1)
        u3 = _rng.uniform_np(_rng.words_np(keys, base + 2))
        u4 = _rng.uniform_np(_rng.words_np(keys, base + 3))
        chi = -2.0 * np.log(u3 * u4) + z2 * z2
        return _rng.SQRT_3_5 * (z1 / np.sqrt(chi / 5.0))
    counters = reps[:, None] * slots + s[None, :]
    if fam == _rng.GAUSSIAN:
        return _rng.normal_np(keys, counters)
    u = _rng.uniform_np(_rng.words_np(keys, counters))
    if fam == _rng.UNIFORM:
        return _rng.SQRT3 * (2.0 * u - 1.0)
    if fam == _rng.EXPONENTIAL:
        return -np.log(u) - 1.0
    if fam == _rng.LAPLACE:
        lo = u < 0.5
        out = np.empty_like(u)
        out[lo] = _rng.SQRT_HALF * np.log(2.0 * u[lo])
        out[~lo] = -_rng.SQRT_HALF * np.log(2.0 * (1.0 - u[~lo]))
        return out
    raise ValueError(f"unknown family code {fam}")


def _combine(corr, K, scales, a, c, chol, z):
    if corr == _rng.INDEPENDENT:
        return scales * z[..., :K]
    if corr == _rng.EXCHANGEABLE:
        return scales * (a * z[..., K:K + 1] + c * z[..., :K])
    # sequential accumulation over j matches the numba loop bit-for-bit
    y = np.zeros(z.shape[:-1] + (K,))
    for k in range(K):
        acc = np.zeros(z.shape[:-1])
        for j in range(k + 1):
            acc = acc + chol[k, j] * z[..., j]
        y[..., k] = acc
    return y


def draws(fam, corr, K, slots, scales, a, c, chol, keys, r0, count):
    """Increment draws, shape ``(len(keys), count, K)``."""
    z = _draw_slots(fam, slots, keys, r0, count)
    return _combine(corr, K, scales, a, c, chol, z)


def draw_batch(fam, corr, K, slots, scales, a, c, chol, key, r0, count, out):
    keys = np.array([key], dtype=np.uint64)
    step = max(1, _CHUNK_WORDS // max(slots, 1))
    for lo in range(0, count, step):
        n = min(step, count - lo)
        out[lo:lo + n] = draws(fam, corr, K, slots, scales, a, c, chol, keys, r0 + lo, n)[0]


def premium_replicas(fam, corr, K, slots, scales, a, c, chol, gaps, key, r0, count, out):
    keys = np.array([key], dtype=np.uint64)
    step = max(1, _CHUNK_WORDS // max(slots, 1))
    for lo in range(0, count, step):
        n = min(step, count - lo)
        y = draws(fam, corr, K, slots, scales, a, c, chol, keys, r0 + lo, n)[0]
        out[lo:lo + n] = np.max(gaps + y, axis=1)


def walk_blocks(fam, corr, K, slots, scales, a, c, chol, drift, kroot, path0, n_paths,
                b_lo, b_hi, horizon, rule, rule_c, inner, checkpoints,
                acc, nacc, t_out, m_out, maxs_out, khat_out,
                nest_out, chk, s_out):
    n_chk = checkpoints.shape[0]
    for b in range(b_lo, b_hi):
        lo = b * _rng.BLOCK
        hi = min(n_paths, lo + _rng.BLOCK)
        P = hi - lo
        kp = _rng.path_keys_np(kroot, np.arange(path0 + lo, path0 + hi, dtype=np.int64))
        S = np.zeros((P, K))
        m_prev = np.zeros(P)
        d1 = np.zeros(P)
        nest = np.zeros(P)
        alive = np.ones(P, dtype=bool)
        chk_rows = np.arange(lo, hi)
        ci = 0
        inner_chunk = max(1, _CHUNK_WORDS // max(P * slots, 1))
        for i in range(1, horizon + 1):
            d = np.zeros(P)
            phi = np.zeros(P)
            idx = np.flatnonzero(alive)
            if idx.size:
                ks = _rng.step_keys_np(kp[idx], i)
                Sa = S[idx]
                mp = m_prev[idx]
                if inner > 0:
                    tot = np.zeros(idx.size)
                    for r0 in range(1, inner + 1, inner_chunk):
                        n = min(inner_chunk, inner + 1 - r0)
                        y = draws(fam, corr, K, slots, scales, a, c, chol, ks, r0, n)
                        v = (Sa[:, None, :] + y) - i * drift
                        # sequential accumulation keeps the running sum in replica order
                        for col in (np.max(v, axis=2) - mp[:, None]).T:
                            tot += col
                    phi_a = tot / inner
                    phi[idx] = phi_a
                    nest[idx] += phi_a
                y = draws(fam, corr, K, slots, scales, a, c, chol, ks, 0, 1)[:, 0, :]
                Sa = Sa + y
                S[idx] = Sa
                R = Sa - i * drift
                kbest = np.argmax(R, axis=1)
                top1 = R[np.arange(idx.size), kbest]
                d_a = top1 - mp
                d[idx] = d_a
                if i == 1:
                    d1[idx] = d_a
                m_prev[idx] = top1
                stop = np.full(idx.size, i == horizon)
                if rule == 1:
                    stop |= top1 >= rule_c
                elif rule == 2:
                    if K > 1:
                        top2 = np.partition(R, K - 2, axis=1)[:, K - 2]
                        stop |= (top1 - top2) >= rule_c
                    else:
                        stop[:] = True
                if stop.any():
                    sidx = idx[stop]
                    rows = lo + sidx
                    Ss = S[sidx]
                    alive[sidx] = False
                    t_out[rows] = i
                    m_out[rows] = top1[stop]
                    maxs_out[rows] = np.max(Ss, axis=1)
                    khat_out[rows] = kbest[stop]
                    nest_out[rows] = nest[sidx]
                    if s_out.shape[0] > 0:
                        s_out[rows] = Ss
            j = i - 1
            acc[b, 0, j] += np.sum(m_prev)
            acc[b, 1, j] += np.sum(m_prev * m_prev)
            acc[b, 2, j] += np.sum(d)
            acc[b, 3, j] += np.sum(d * d)
            acc[b, 4, j] += np.sum(d * d1)
            if inner > 0:
                x = d - phi
                nacc[b, 0, j] += np.sum(phi)
                nacc[b, 1, j] += np.sum(phi * phi)
                nacc[b, 2, j] += np.sum(x)
                nacc[b, 3, j] += np.sum(x * x)
            while ci < n_chk and checkpoints[ci] == i:
                chk[chk_rows, ci] = m_prev
                ci += 1
