"""Compiled vs pure-Python skew-symmetric Jacobi kernel.

    python3 benchmarks/bench_kernels.py [--sizes 4 8 16 32] [--repeat 20]

Prints one row per size: best-of-repeat wall time for each backend, the
speed-up, and the largest canonical-value difference between them.
numpy's Hermitian eigensolver on i*A is timed as a reference point.
"""
import argparse
import time

import numpy as np

from fer_er import _kernels_py

try:
    from fer_er import _kernels
except ImportError:
    _kernels = None


def random_skew(n_modes, rng):
    a = rng.normal(size=(2 * n_modes, 2 * n_modes))
    return a - a.T


def best_time(fn, a, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(a)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[2, 4, 8, 16, 32])
    ap.add_argument("--repeat", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    if _kernels is None:
        print("compiled extension not built; timing the Python kernel only")
    print(f"{'modes':>6} {'python ms':>10} {'compiled ms':>12} {'speed-up':>9} {'eigh ms':>8} {'max |dv|':>10}")
    for n in args.sizes:
        a = random_skew(n, rng)
        tp, (xp, _, _, _) = best_time(lambda m: _kernels_py.skew_jacobi(m, 1e-12, 100), a, max(1, args.repeat // 4))
        te, _ = best_time(lambda m: np.linalg.eigh(1j * m), a, args.repeat)
        if _kernels is not None:
            tc, (xc, _, _, _) = best_time(lambda m: _kernels.skew_jacobi(m, 1e-12, 100), a, args.repeat)
            vp = np.sort(np.abs(xp))
            vc = np.sort(np.abs(xc))
            dv = np.abs(vp - vc).max()
            print(f"{n:>6} {tp * 1e3:>10.3f} {tc * 1e3:>12.3f} {tp / tc:>9.1f} {te * 1e3:>8.3f} {dv:>10.1e}")
        else:
            print(f"{n:>6} {tp * 1e3:>10.3f} {'-':>12} {'-':>9} {te * 1e3:>8.3f} {'-':>10}")


if __name__ == "__main__":
    main()
