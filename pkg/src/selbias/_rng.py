"""Counter-based random stream shared by both kernel backends.

Every 64-bit word is a pure function of ``(root_seed, path, step, counter)``::

    k_root = mix(root_seed + C_ROOT)
    k_path = mix(k_root ^ mix((path + 1) * C_PATH))
    k_step = mix(k_path ^ mix((step + 1) * C_STEP))
    word_j = mix(k_step + (j + 1) * GOLDEN)

where ``mix`` is the splitmix64 finaliser. A replica ``r`` of a draw with
``slots`` standardized coordinates owns counters
``[(r*slots + s)*wps + w]``; Rademacher coordinates are bit-packed, coordinate
``b = r*slots + s`` being bit ``b & 63`` of word ``b >> 6``.

Uniforms are ``((w >> 12) + 0.5) * 2**-52``, strictly inside (0, 1) (every
value is exact, so none rounds to 1).
Gaussians use a 128-layer ziggurat: the top 52 bits of a word give the
abscissa and the low 7 bits the layer, so an accepted normal costs one word;
the rare rejections draw from a separate overflow stream.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1

GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
C_ROOT = 0x632BE59BD9B4E019
C_PATH = 0xD1B54A32D192ED03
C_STEP = 0xAEF17502108EF2D9

TWO_M52 = 1.0 / 4503599627370496.0
SQRT3 = 1.7320508075688772
SQRT_HALF = 0.7071067811865476
SQRT_3_5 = 0.7745966692414834

# family codes understood by the kernels
GAUSSIAN = 0
STUDENT_T5 = 1
EXPONENTIAL = 2
UNIFORM = 3
LAPLACE = 4
RADEMACHER = 5

FAMILY_CODES = {
    "gaussian": GAUSSIAN,
    "student_t5": STUDENT_T5,
    "exponential_centered": EXPONENTIAL,
    "uniform_centered": UNIFORM,
    "laplace": LAPLACE,
    "rademacher": RADEMACHER,
}

# words consumed per standardized coordinate (rademacher is bit-packed)
WORDS_PER_SLOT = {GAUSSIAN: 1, STUDENT_T5: 4, EXPONENTIAL: 1, UNIFORM: 1, LAPLACE: 1, RADEMACHER: 0}

# correlation modes
INDEPENDENT = 0
EXCHANGEABLE = 1
CHOLESKY = 2

BLOCK = 1024  # paths per accumulation block; part of the reproducibility contract


def mix64(z: int) -> int:
    """splitmix64 finaliser on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def root_key(root_seed: int) -> int:
    if not 0 <= int(root_seed) <= MASK64:
        raise ValueError(f"root_seed must be an unsigned 64-bit integer, got {root_seed}")
    return mix64(int(root_seed) + C_ROOT)


def path_key(kroot: int, path: int) -> int:
    return mix64(kroot ^ mix64((path + 1) * C_PATH))


def step_key(kpath: int, step: int) -> int:
    return mix64(kpath ^ mix64((step + 1) * C_STEP))


# ---------------------------------------------------------------------------
# numpy vector forms (uint64 arrays wrap on overflow without warnings)
# ---------------------------------------------------------------------------

_U = np.uint64


def mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U(30))) * _U(MIX1)
    z = (z ^ (z >> _U(27))) * _U(MIX2)
    return z ^ (z >> _U(31))


def path_keys_np(kroot: int, paths: np.ndarray) -> np.ndarray:
    p = np.asarray(paths, dtype=np.uint64)
    return mix64_np(_U(kroot) ^ mix64_np((p + _U(1)) * _U(C_PATH)))


def step_keys_np(kpaths: np.ndarray, step: int) -> np.ndarray:
    s = mix64_np(np.array([step + 1], dtype=np.uint64) * _U(C_STEP))[0]
    return mix64_np(kpaths ^ s)


def words_np(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Words for every (key, counter) pair; output shape ``keys.shape + counters.shape``."""
    c = (np.asarray(counters, dtype=np.uint64) + _U(1)) * _U(GOLDEN)
    k = np.asarray(keys, dtype=np.uint64).reshape(keys.shape + (1,) * c.ndim)
    return mix64_np(k + c)


def uniform_np(w: np.ndarray) -> np.ndarray:
    return ((w >> _U(12)).astype(np.float64) + 0.5) * TWO_M52


# Ziggurat tables (128 layers, Doornik's ZIGNOR construction)
ZIG_LAYERS = 128
ZIG_R = 3.442619855899
ZIG_V = 9.91256303526217e-3
C_OVERFLOW = 0x8CB92BA72F3D8DD7


def _zig_tables():
    f = lambda x: math.exp(-0.5 * x * x)  # noqa: E731
    x = np.zeros(ZIG_LAYERS + 1)
    x[0] = ZIG_V / f(ZIG_R)
    x[1] = ZIG_R
    for i in range(2, ZIG_LAYERS):
        x[i] = math.sqrt(-2.0 * math.log(ZIG_V / x[i - 1] + f(x[i - 1])))
    return x, x[1:] / x[:-1]


ZIG_X, ZIG_RATIO = _zig_tables()


def zig_slow(key: int, j: int, u: float, layer: int) -> float:
    """Rejection branch of the ziggurat for normal number ``j`` of stream ``key``.

    Extra randomness comes from an overflow stream, words ``j*64 + m``, so the
    main counter layout stays one word per normal.
    """
    kovf = mix64(key ^ C_OVERFLOW)
    m = 0

    def ovf():
        nonlocal m
        w = mix64(kovf + ((j * 64 + m + 1) * GOLDEN))
        m += 1
        return w

    def unif(w):
        return ((w >> 12) + 0.5) * TWO_M52

    while True:
        if layer == 0:
            neg = u < 0.0
            while True:
                x = math.log(unif(ovf())) / ZIG_R
                y = math.log(unif(ovf()))
                if -2.0 * y >= x * x:
                    return x - ZIG_R if neg else ZIG_R - x
        x = u * ZIG_X[layer]
        f0 = math.exp(-0.5 * (ZIG_X[layer] * ZIG_X[layer] - x * x))
        f1 = math.exp(-0.5 * (ZIG_X[layer + 1] * ZIG_X[layer + 1] - x * x))
        if f1 + unif(ovf()) * (f0 - f1) < 1.0:
            return x
        w = ovf()
        u = 2.0 * unif(w) - 1.0
        layer = w & (ZIG_LAYERS - 1)
        if abs(u) < ZIG_RATIO[layer]:
            return u * ZIG_X[layer]


def normal_np(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Ziggurat normals for every (key, counter) pair."""
    w = words_np(keys, counters)
    u = 2.0 * uniform_np(w) - 1.0
    layer = (w & _U(ZIG_LAYERS - 1)).astype(np.int64)
    out = u * ZIG_X[layer]
    slow = ~(np.abs(u) < ZIG_RATIO[layer])
    if slow.any():
        kk = np.broadcast_to(np.asarray(keys, dtype=np.uint64).reshape(keys.shape + (1,) * np.ndim(counters)),
                             w.shape)
        cc = np.broadcast_to(np.asarray(counters, dtype=np.int64), w.shape)
        for idx in zip(*np.nonzero(slow)):
            out[idx] = zig_slow(int(kk[idx]), int(cc[idx]), float(u[idx]), int(layer[idx]))
    return out
