"""Compare the compiled and pure-Python Monte-Carlo kernels.

Usage: python benchmarks/bench_kernels.py [--trials N]
"""

import argparse
import time

from qnetsim import kernels


def _time(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=200_000)
    args = ap.parse_args(argv)
    impls = kernels.implementations()
    p_links, p_swaps = [0.9] * 4, [0.5] * 3
    cases = {
        "uniforms": lambda m: kernels.uniforms(1, args.trials, impl=m),
        "chain_sync_trials": lambda m: kernels.chain_sync_trials(p_links, p_swaps, args.trials, 1, impl=m),
        "async_chain_trials": lambda m: kernels.async_chain_trials([0.1, 0.1, 0.1], [1.0, 1.0], args.trials // 20, 1,
                                                                   impl=m)[:1],
    }
    print(f"{'kernel':<22}" + "".join(f"{name:>12}" for name in impls) + f"{'speedup':>10}")
    for case, fn in cases.items():
        times = {name: _time(lambda: fn(m))[0] for name, m in impls.items()}
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{case:<22}" + "".join(f"{t:>11.4f}s" for t in times.values()) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
