"""Compare the numba and pure-numpy kernel backends on the walk ensemble.

Usage: python3 benchmarks/bench_backends.py [--paths N] [--horizon N] [--repeat R]

Reports wall time and nanoseconds per (path, step, arm) draw for each backend
and checks that both produce the same per-path maxima.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from selbias import _backend
from selbias._ensemble import run_walks
from selbias.increments import IncrementModel, SeedSpec

CASES = [
    ("gaussian", 10, None),
    ("gaussian", 10, 0.5),
    ("uniform_centered", 50, None),
    ("rademacher", 2, None),
    ("student_t5", 5, None),
]


def _time(model, horizon, paths, repeat, inner):
    best = float("inf")
    summ = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        summ = run_walks(model, horizon, paths, SeedSpec(7), inner=inner)
        best = min(best, time.perf_counter() - t0)
    return best, summ


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=4096)
    ap.add_argument("--horizon", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--inner", type=int, default=0, help="nested inner replicas")
    args = ap.parse_args(argv)
    if not _backend.HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    print(f"{'family':<18}{'K':>4}{'rho':>6}{'numba s':>10}{'numpy s':>10}{'ns/draw nb':>12}"
          f"{'ns/draw np':>12}{'speedup':>9}  same")
    for fam, k, rho in CASES:
        model = IncrementModel(fam, k, rho=rho)
        draws = args.paths * args.horizon * k * (1 + args.inner)
        res = {}
        for name in ("numba", "numpy"):
            prev = _backend.set_backend(name)
            try:
                run_walks(model, 2, 2, SeedSpec(0), inner=args.inner)  # compile / warm up
                res[name] = _time(model, args.horizon, args.paths, args.repeat, args.inner)
            finally:
                _backend.set_backend(prev)
        (tn, sn), (tp, sp) = res["numba"], res["numpy"]
        same = np.allclose(sn.max_at_stop, sp.max_at_stop, rtol=0, atol=1e-12)
        print(f"{fam:<18}{k:>4}{'-' if rho is None else rho:>6}{tn:>10.3f}{tp:>10.3f}"
              f"{1e9 * tn / draws:>12.2f}{1e9 * tp / draws:>12.2f}{tp / tn:>9.1f}  {same}")


if __name__ == "__main__":
    main()
