"""Compare the compiled and numpy SDE kernels on the bundled models.

Usage: python benchmarks/bench_kernels.py [--paths N] [--steps S] [--repeat R]
"""

import argparse
import time
from importlib import resources

import numpy as np

from ufgkit.cli.modelfile import load_model
from ufgkit.sdesim import backend


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--paths", type=int, default=4096)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--threads", type=int, default=None)
    args = p.parse_args()

    names = backend.available()
    print(f"backends: {', '.join(names)}; paths {args.paths}, steps {args.steps}")
    print(f"{'model':<16}{'backend':<10}{'seconds':>10}{'path-steps/s':>16}{'speedup':>10}")
    for name in ("grusin", "ou-positive", "heisenberg", "example22"):
        mf = load_model(resources.files("ufgkit") / "models" / f"{name}.model")
        model = mf.sde_model()
        start = np.atleast_2d(mf.base_point())
        snaps = np.array([args.steps])
        results = {}
        for b in names:
            run = lambda: backend.simulate(model.table, start, snaps, 1e-3, 1, 0, args.paths,
                                           threads=args.threads, backend=b)
            results[b] = best_time(run, args.repeat)
        for b in names:
            rate = args.paths * args.steps / results[b]
            speed = results["python"] / results[b]
            print(f"{name:<16}{b:<10}{results[b]:>10.4f}{rate:>16.3g}{speed:>9.1f}x")


if __name__ == "__main__":
    main()
