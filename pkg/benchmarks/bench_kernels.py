"""Time the numba and numpy flavours of each hot kernel on identical inputs.

    python benchmarks/bench_kernels.py [--paths 4096] [--steps 1000] [--nodes 4000] [--repeat 5]

Normal draws are generated once up front, so only the kernels are timed.
The first numba call per kernel (compilation or cache load) is excluded.
"""

import argparse
import time

import numpy as np

from merton_lab import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--paths", type=int, default=4096)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--nodes", type=int, default=4000)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    rng = np.random.default_rng(0)
    z = rng.standard_normal((args.paths, args.steps))
    n = args.nodes
    lower, upper = -rng.uniform(0, 1, n), -rng.uniform(0, 1, n)
    diag = 2.5 + rng.uniform(0, 1, n)
    rhs = rng.standard_normal(n)
    dt = 0.01

    cases = {
        "simulate_paths exact-log": lambda: kernels.simulate_paths(1.0, 0.03, 0.005, 0.1, -0.04, -0.2, dt, z),
        "simulate_paths euler": lambda: kernels.simulate_paths(1.0, 0.03, 0.01, 0.1, -0.04, -0.2, dt, z,
                                                               euler=True),
        "utility_integral": lambda: kernels.utility_integral(1.0, 0.03, 0.005, 0.1, 0.03, 2.0, dt, z),
        "solve_tridiagonal": lambda: kernels.solve_tridiagonal(lower, diag, upper, rhs),
    }
    original = kernels.get_backend()
    rows = []
    try:
        for name, fn in cases.items():
            timing = {}
            for backend in ("numba", "numpy"):
                kernels.set_backend(backend)
                fn()  # warm-up
                timing[backend] = best_of(fn, args.repeat)
            rows.append((name, timing["numba"], timing["numpy"]))
    finally:
        kernels.set_backend(original)

    print(f"paths={args.paths} steps={args.steps} nodes={args.nodes} best of {args.repeat}")
    print(f"{'kernel':28s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speed-up':>9s}")
    for name, tj, tn in rows:
        print(f"{name:28s} {1e3 * tj:11.3f} {1e3 * tn:11.3f} {tn / tj:8.1f}x")


if __name__ == "__main__":
    main()
