"""numba kernels. Mirrors ``_kernels_numpy`` draw-for-draw."""

from __future__ import annotations

import math
import threading

import numpy as np
from numba import njit

from . import _rng

_GOLDEN = np.uint64(_rng.GOLDEN)
_MIX1 = np.uint64(_rng.MIX1)
_MIX2 = np.uint64(_rng.MIX2)
_C_PATH = np.uint64(_rng.C_PATH)
_C_STEP = np.uint64(_rng.C_STEP)
_TWO_M52 = _rng.TWO_M52
_SQRT3 = _rng.SQRT3
_SQRT_HALF = _rng.SQRT_HALF
_SQRT_3_5 = _rng.SQRT_3_5
_BLOCK = _rng.BLOCK

_ZX = _rng.ZIG_X
_ZRATIO = _rng.ZIG_RATIO
_ZR = _rng.ZIG_R
_C_OVF = np.uint64(_rng.C_OVERFLOW)
_ZMASK = np.uint64(_rng.ZIG_LAYERS - 1)

_OPTS = dict(cache=True, nogil=True)
_INLINE = dict(cache=True, nogil=True, inline="always")


@njit(**_INLINE)
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(**_INLINE)
def _path_key(kroot, path):
    return _mix(kroot ^ _mix((np.uint64(path) + np.uint64(1)) * _C_PATH))


@njit(**_INLINE)
def _step_key(kpath, step):
    return _mix(kpath ^ _mix((np.uint64(step) + np.uint64(1)) * _C_STEP))


@njit(**_INLINE)
def _word(key, j):
    return _mix(key + (np.uint64(j) + np.uint64(1)) * _GOLDEN)


@njit(**_INLINE)
def _unif(w):
    return (np.float64(w >> np.uint64(12)) + 0.5) * _TWO_M52


@njit(**_OPTS)
def _zig_slow(key, j, u, layer):
    kovf = _mix(key ^ _C_OVF)
    base = j * 64
    m = 0
    while True:
        if layer == 0:
            neg = u < 0.0
            while True:
                x = math.log(_unif(_word(kovf, base + m))) / _ZR
                y = math.log(_unif(_word(kovf, base + m + 1)))
                m += 2
                if -2.0 * y >= x * x:
                    return x - _ZR if neg else _ZR - x
        x = u * _ZX[layer]
        f0 = math.exp(-0.5 * (_ZX[layer] * _ZX[layer] - x * x))
        f1 = math.exp(-0.5 * (_ZX[layer + 1] * _ZX[layer + 1] - x * x))
        if f1 + _unif(_word(kovf, base + m)) * (f0 - f1) < 1.0:
            return x
        w = _word(kovf, base + m + 1)
        m += 2
        u = 2.0 * _unif(w) - 1.0
        layer = np.int64(w & _ZMASK)
        if abs(u) < _ZRATIO[layer]:
            return u * _ZX[layer]


@njit(**_INLINE)
def _normal(key, j):
    w = _word(key, j)
    u = 2.0 * _unif(w) - 1.0
    layer = np.int64(w & _ZMASK)
    if abs(u) < _ZRATIO[layer]:
        return u * _ZX[layer]
    return _zig_slow(key, j, u, layer)


@njit(**_INLINE)
def _draw_slots(fam, slots, key, r, z, cache):
    """Standardized coordinates of replica ``r`` into ``z[:slots]``.

    ``cache`` holds (word index + 1, word) for the bit-packed family and must be
    zeroed whenever ``key`` changes.
    """
    if fam == 5:
        s = 0
        while s < slots:
            b = r * slots + s
            wi = b >> 6
            off = b & 63
            if cache[0] != np.uint64(wi + 1):
                cache[0] = np.uint64(wi + 1)
                cache[1] = _word(key, wi)
            w = cache[1] >> np.uint64(off)
            n = min(64 - off, slots - s)
            for t in range(n):
                z[s + t] = np.float64((w >> np.uint64(t)) & np.uint64(1)) * 2.0 - 1.0
            s += n
    elif fam == 0:
        base = r * slots
        for s in range(slots):
            z[s] = _normal(key, base + s)
    elif fam == 3:
        base = r * slots
        for s in range(slots):
            z[s] = _SQRT3 * (2.0 * _unif(_word(key, base + s)) - 1.0)
    elif fam == 2:
        base = r * slots
        for s in range(slots):
            z[s] = -math.log(_unif(_word(key, base + s))) - 1.0
    elif fam == 4:
        base = r * slots
        for s in range(slots):
            u = _unif(_word(key, base + s))
            if u < 0.5:
                z[s] = _SQRT_HALF * math.log(2.0 * u)
            else:
                z[s] = -_SQRT_HALF * math.log(2.0 * (1.0 - u))
    else:
        base = r * slots * 4
        for s in range(slots):
            j = base + 4 * s
            z1 = _normal(key, j)
            z2 = _normal(key, j + 1)
            chi = -2.0 * math.log(_unif(_word(key, j + 2)) * _unif(_word(key, j + 3))) + z2 * z2
            z[s] = _SQRT_3_5 * (z1 / math.sqrt(chi / 5.0))


@njit(**_INLINE)
def _combine(corr, K, scales, a, c, chol, z, y):
    if corr == 0:
        for k in range(K):
            y[k] = scales[k] * z[k]
    elif corr == 1:
        w = a * z[K]
        for k in range(K):
            y[k] = scales[k] * (w + c * z[k])
    else:
        for k in range(K):
            acc = 0.0
            for j in range(k + 1):
                acc += chol[k, j] * z[j]
            y[k] = acc


@njit(**_INLINE)
def _argmax_drifted(S, drift, i, top):
    """Lowest index attaining ``top`` (recomputed with the same arithmetic)."""
    for k in range(S.shape[0]):
        if S[k] - i * drift[k] == top:
            return k
    return 0


def _build(FAM, CORR):
    """Kernels specialised to one family and correlation mode.

    ``FAM`` and ``CORR`` are closure constants, so numba folds the dispatch
    branches away; each combination is compiled (and cached) on first use.
    """

    @njit(**_OPTS)
    def draw_batch(K, slots, scales, a, c, chol, key, r0, count, out):
        z = np.empty(slots)
        y = np.empty(K)
        cache = np.zeros(2, np.uint64)
        for r in range(count):
            _draw_slots(FAM, slots, key, r0 + r, z, cache)
            _combine(CORR, K, scales, a, c, chol, z, y)
            for k in range(K):
                out[r, k] = y[k]


    @njit(**_OPTS)
    def premium_replicas(K, slots, scales, a, c, chol, gaps, key, r0, count, out):
        """Per-replica ``max_k(gaps_k + Y_k)``; ``gaps = u - max(u)``."""
        z = np.empty(slots)
        y = np.empty(K)
        cache = np.zeros(2, np.uint64)
        for r in range(count):
            _draw_slots(FAM, slots, key, r0 + r, z, cache)
            _combine(CORR, K, scales, a, c, chol, z, y)
            mx = -np.inf
            for k in range(K):
                v = gaps[k] + y[k]
                mx = v if v > mx else mx
            out[r] = mx


    @njit(**_OPTS)
    def walk_blocks(K, slots, scales, a, c, chol, drift, kroot, path0, n_paths,
                    b_lo, b_hi, horizon, rule, rule_c, inner, checkpoints,
                    acc, nacc, t_out, m_out, maxs_out, khat_out,
                    nest_out, chk, s_out):
        """Simulate paths of blocks ``[b_lo, b_hi)`` of the stopped walk ensemble.

        Drifted state ``R_i = S_i - i*drift``; ``M_i = max_k R_{i,k}``. Rule codes:
        0 fixed horizon, 1 stop once ``M_i >= rule_c``, 2 stop once the leader's
        margin over the runner-up is ``>= rule_c``. Per-step sums of the stopped
        process ``M_{T^i}`` go to ``acc[b]`` rows (M, M^2, D, D^2, D*D_1); nested
        premium sums go to ``nacc[b]`` rows (phi, phi^2, D-phi, (D-phi)^2).
        """
        S = np.zeros(K)
        y = np.empty(K)
        z = np.empty(slots)
        cache = np.zeros(2, np.uint64)
        n_chk = checkpoints.shape[0]
        lookup = FAM == 5 and CORR != 2 and slots <= 8
        npat = 1 << slots if lookup else 1
        pmask = np.uint64(npat - 1)
        val = np.empty(npat)
        for b in range(b_lo, b_hi):
            lo = b * _BLOCK
            hi = min(n_paths, lo + _BLOCK)
            for p in range(lo, hi):
                kp = _path_key(kroot, path0 + p)
                for k in range(K):
                    S[k] = 0.0
                m_prev = 0.0
                d1 = 0.0
                nest = 0.0
                alive = True
                ci = 0
                for i in range(1, horizon + 1):
                    d = 0.0
                    phi = 0.0
                    if alive:
                        ks = _step_key(kp, i)
                        cache[0] = np.uint64(0)
                        if inner > 0 and lookup:
                            # every replica is one of 2**slots sign patterns: tabulate
                            # the summand once per step, then sum in replica order
                            for pat in range(npat):
                                for s in range(slots):
                                    z[s] = 1.0 if (pat >> s) & 1 else -1.0
                                _combine(CORR, K, scales, a, c, chol, z, y)
                                mx = -np.inf
                                for k in range(K):
                                    v = (S[k] + y[k]) - i * drift[k]
                                    mx = v if v > mx else mx
                                val[pat] = mx - m_prev
                            tot = 0.0
                            wi_cur = -2
                            w0 = np.uint64(0)
                            w1 = np.uint64(0)
                            for r in range(1, inner + 1):
                                b0 = r * slots
                                wi = b0 >> 6
                                off = b0 & 63
                                if wi != wi_cur:
                                    w0 = w1 if wi == wi_cur + 1 else _word(ks, wi)
                                    w1 = _word(ks, wi + 1)
                                    wi_cur = wi
                                bits = w0 >> np.uint64(off)
                                if off + slots > 64:
                                    bits |= w1 << np.uint64(64 - off)
                                tot += val[np.int64(bits & pmask)]
                            phi = tot / inner
                            nest += phi
                        elif inner > 0:
                            tot = 0.0
                            for r in range(1, inner + 1):
                                _draw_slots(FAM, slots, ks, r, z, cache)
                                _combine(CORR, K, scales, a, c, chol, z, y)
                                mx = -np.inf
                                for k in range(K):
                                    v = (S[k] + y[k]) - i * drift[k]
                                    mx = v if v > mx else mx
                                tot += mx - m_prev
                            phi = tot / inner
                            nest += phi
                        _draw_slots(FAM, slots, ks, 0, z, cache)
                        _combine(CORR, K, scales, a, c, chol, z, y)
                        # branchless maximum; the argmax is only located when needed
                        top1 = -np.inf
                        for k in range(K):
                            S[k] += y[k]
                            v = S[k] - i * drift[k]
                            top1 = v if v > top1 else top1
                        d = top1 - m_prev
                        if i == 1:
                            d1 = d
                        m_prev = top1
                        stop = i == horizon
                        if rule == 1 and top1 >= rule_c:
                            stop = True
                        elif rule == 2:
                            kbest = _argmax_drifted(S, drift, i, top1)
                            top2 = -np.inf
                            for k in range(K):
                                if k != kbest:
                                    v = S[k] - i * drift[k]
                                    top2 = v if v > top2 else top2
                            if top1 - top2 >= rule_c:
                                stop = True
                        if stop:
                            alive = False
                            kbest = _argmax_drifted(S, drift, i, top1)
                            smax = -np.inf
                            for k in range(K):
                                if S[k] > smax:
                                    smax = S[k]
                            t_out[p] = i
                            m_out[p] = top1
                            maxs_out[p] = smax
                            khat_out[p] = kbest
                            nest_out[p] = nest
                            if s_out.shape[0] > 0:
                                for k in range(K):
                                    s_out[p, k] = S[k]
                    j = i - 1
                    acc[b, 0, j] += m_prev
                    acc[b, 1, j] += m_prev * m_prev
                    acc[b, 2, j] += d
                    acc[b, 3, j] += d * d
                    acc[b, 4, j] += d * d1
                    if inner > 0:
                        x = d - phi
                        nacc[b, 0, j] += phi
                        nacc[b, 1, j] += phi * phi
                        nacc[b, 2, j] += x
                        nacc[b, 3, j] += x * x
                    while ci < n_chk and checkpoints[ci] == i:
                        chk[p, ci] = m_prev
                        ci += 1

    return draw_batch, premium_replicas, walk_blocks


_built = {}
_build_lock = threading.Lock()


def _get(fam, corr):
    key = (int(fam), int(corr))
    fns = _built.get(key)
    if fns is None:
        with _build_lock:
            fns = _built.get(key)
            if fns is None:
                fns = _built[key] = _build(*key)
    return fns


def draw_batch(fam, corr, *args):
    _get(fam, corr)[0](*args)


def premium_replicas(fam, corr, *args):
    _get(fam, corr)[1](*args)


def walk_blocks(fam, corr, *args):
    _get(fam, corr)[2](*args)
