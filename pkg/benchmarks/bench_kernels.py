"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The first numba call (compilation) is excluded.  Outputs are also compared
so a speedup never hides a wrong answer.
"""
import argparse
import time

import numpy as np

from gc0lab import kernels
from gc0lab._accel import HAVE_NUMBA
from gc0lab.prg import Field


def best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(rng):
    bits = rng.integers(0, 2, 1 << 12).astype(np.uint8)
    yield "subcube_tables n=12", lambda k: (lambda: k(bits, 12)), kernels.subcube_tables_nb, kernels.subcube_tables_np

    vec = rng.standard_normal(1 << 20)
    yield "fwht 2^20", lambda k: (lambda: k(vec.copy())), kernels.fwht_nb, kernels.fwht_np

    F = Field(16)
    a = rng.integers(0, 1 << 16, 1 << 18, dtype=np.int64)
    b = rng.integers(0, 1 << 16, 1 << 18, dtype=np.int64)
    xs, ys = a.astype(np.int64), b.astype(np.int64)
    yield "aghp_words n=16 r=16, 2^18 seeds", lambda k: (lambda: k(xs, ys, 16, 16, F.low)), \
        kernels.aghp_words_nb, kernels.aghp_words_np

    F10 = Field(10)
    yield "aghp_histogram n=12 r=10", lambda k: (lambda: k(12, 10, F10.low)), \
        kernels.aghp_histogram_nb, kernels.aghp_histogram_np

    table = 1 - 2 * rng.integers(0, 2, 1 << 14).astype(np.int64)
    N = 1 << 20
    X = rng.integers(0, 1 << 7, N, dtype=np.int64)
    Y = rng.integers(0, 1 << 7, N, dtype=np.int64)
    Z = rng.integers(0, 1 << 7, N, dtype=np.int64)
    yield "bucket_weight n=14 j=7, 2^20 samples", \
        lambda k: (lambda: k(table, np.int64(7), np.int64(5), X, Y, Z)), \
        kernels.bucket_weight_nb, kernels.bucket_weight_np


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba unavailable or disabled; timing numpy kernels only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, bind, nb, npf in cases(rng):
        t_np, out_np = best(bind(npf), args.repeat)
        if HAVE_NUMBA:
            bind(nb)()  # compile
            t_nb, out_nb = best(bind(nb), args.repeat)
            same = all(np.allclose(x, y) for x, y in zip(np.atleast_1d(out_nb), np.atleast_1d(out_np))) \
                if not isinstance(out_nb, tuple) else all(np.array_equal(x, y) for x, y in zip(out_nb, out_np))
            flag = "" if same else "  MISMATCH"
            print(f"{name:40s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}{flag}")
        else:
            print(f"{name:40s} {'-':>10s} {t_np:10.4f} {'-':>8s}")


if __name__ == "__main__":
    main()
