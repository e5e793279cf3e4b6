"""Compare the compiled kernels against the pure-Python fallbacks.

Run directly: python benchmarks/bench_kernels.py
"""

import argparse
import random
import string
import time

import numpy as np

from noisegate._kernels import BACKEND, pure

try:
    from noisegate._kernels import _speedups
except ImportError:
    _speedups = None


def _time(fn, repeats):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def bench_levenshtein(rng, repeats):
    pairs = [
        (
            "".join(rng.choices(string.ascii_lowercase + " ", k=rng.randint(20, 60))),
            "".join(rng.choices(string.ascii_lowercase + " ", k=rng.randint(20, 60))),
        )
        for _ in range(200)
    ]

    def run(impl):
        return lambda: [impl(a, b) for a, b in pairs]

    return "levenshtein (200 pairs, len 20-60)", run(pure.levenshtein), (
        run(_speedups.levenshtein) if _speedups else None
    ), repeats


def bench_median(rng, repeats):
    clip = np.array([rng.randint(-32768, 32767) for _ in range(16000)], dtype=np.int16)

    def run(impl):
        return lambda: impl(clip, 9)

    return "sliding_median (16k samples, window 9)", run(pure.sliding_median), (
        run(_speedups.sliding_median) if _speedups else None
    ), repeats


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    rng = random.Random(0)
    print(f"active backend: {BACKEND}")
    if _speedups is None:
        print("compiled extension not available; timing the pure lane only\n")

    header = f"{'kernel':40s} {'pure':>10s} {'compiled':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for name, pure_fn, fast_fn, repeats in (
        bench_levenshtein(rng, args.repeats),
        bench_median(rng, args.repeats),
    ):
        t_pure = _time(pure_fn, repeats) * 1000
        if fast_fn is not None:
            t_fast = _time(fast_fn, repeats) * 1000
            print(f"{name:40s} {t_pure:8.2f}ms {t_fast:8.2f}ms {t_pure / t_fast:7.1f}x")
        else:
            print(f"{name:40s} {t_pure:8.2f}ms {'-':>10s} {'-':>8s}")


if __name__ == "__main__":
    main()
