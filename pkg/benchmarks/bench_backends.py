"""Wall-clock comparison of the numba and numpy kernels.

    python3 benchmarks/bench_backends.py [--n 4000] [--repeat 3]

Each kernel is run once to warm up (numba compiles on first call), then timed
``--repeat`` times; the best time is reported.
"""
import argparse
import time

import numpy as np

from swldpc import builtin
from swldpc.construction import realize
from swldpc.decoder import sum_product
from swldpc.exit import ChannelSpec, run_joint_exit
from swldpc.simulator import channel_llr, modulate

BACKENDS = ("numba", "numpy")


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--iters", type=int, default=50)
    a = ap.parse_args()

    ens = builtin.load_builtin("t1_x6")
    code = realize(ens, a.n, seed=1)
    g = code.graph()
    rng = np.random.default_rng(0)
    sigma = 0.9
    r = modulate(np.zeros(code.n, dtype=np.uint8)) + sigma * rng.standard_normal(code.n)
    prior = channel_llr(r, sigma)
    spec = ChannelSpec(-1.2, 0.9, 0.5)

    cases = {
        f"sum-product n={a.n} x{a.iters}": lambda b: sum_product(g, prior, n_iter=a.iters, backend=b),
        f"PEG n={a.n}": lambda b: realize(ens, a.n, seed=1, backend=b),
        "joint EXIT t1_x6": lambda b: run_joint_exit(ens, spec, backend=b),
        f"encode 256 x n={a.n}": lambda b: code.encode(rng.integers(0, 2, (256, code.k), dtype=np.uint8),
                                                       backend=b),
    }
    print(f"{'kernel':32s}" + "".join(f"{b:>12s}" for b in BACKENDS) + f"{'speedup':>10s}")
    for name, fn in cases.items():
        t = [best_of(lambda: fn(b), a.repeat) for b in BACKENDS]
        print(f"{name:32s}" + "".join(f"{x:11.4f}s" for x in t) + f"{t[1] / t[0]:9.1f}x")


if __name__ == "__main__":
    main()
