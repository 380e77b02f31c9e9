"""Compare the compiled and pure-Python OT kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--sizes 8 16 32 64]

Times the exact solver and Sinkhorn on random cosine-cost problems of
each size, checks both backends return the same cost, and prints a table.
"""

import argparse
import time

import numpy as np

from skelmatch import ot


def problem(n, C=32, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, C))
    Y = rng.standard_normal((n, C)) + 0.5
    d = ot.cost_matrix(X, Y)
    r, c = ot.cross_reference_weights(X, Y)
    return d, r, c


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32, 64, 128])
    ap.add_argument("--sinkhorn-sizes", type=int, nargs="+", default=[64, 256, 800])
    args = ap.parse_args(argv)

    if "compiled" not in ot.BACKENDS:
        print("compiled extension not built; only the python backend is available")
    backends = sorted(ot.BACKENDS)
    print(f"{'solver':<10}{'size':>6}" + "".join(f"{b + ' ms':>14}" for b in backends) + f"{'speedup':>10}{'|dcost|':>12}")
    rows = [("exact", n) for n in args.sizes] + [("sinkhorn", n) for n in args.sinkhorn_sizes]
    for solver, n in rows:
        d, r, c = problem(n)
        res = {}
        for b in backends:
            if solver == "exact":
                fn = lambda: ot.solve_exact(d, r, c, exact_limit=n * n, backend=b)
            else:
                fn = lambda: ot.solve_sinkhorn(d, r, c, epsilon=0.05, backend=b)
            res[b] = best_of(fn, args.repeat)
        ms = [res[b][0] * 1e3 for b in backends]
        speed = res["python"][0] / res["compiled"][0] if len(backends) > 1 else 1.0
        gap = max(abs(res[b][1].cost - res[backends[0]][1].cost) for b in backends)
        print(f"{solver:<10}{n:>6}" + "".join(f"{t:>14.3f}" for t in ms) + f"{speed:>9.1f}x{gap:>12.2e}")


if __name__ == "__main__":
    main()
