"""Time the numba and numpy GT-SAGA steppers on the same rounds.

    python benchmarks/bench_kernels.py [--rounds 20000] [--sizes 8x32x10,32x64x20]

Each size is ``n x m x p``.  The first numba call (JIT compile, or cache
load) is excluded from the timing.  Both backends consume identical picks,
and the final estimates are compared to confirm they agree.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from gtsaga.algorithm import advance, init
from gtsaga.problems import generate_quadratic_problem
from gtsaga.topology import build_ring


def bench(n: int, m: int, p: int, rounds: int) -> dict:
    prob = generate_quadratic_problem(n, m, p, 10.0, seed=0)
    W = build_ring(n)
    picks = np.random.default_rng(1).integers(0, m, size=(n, rounds))
    out = {}
    for backend in ("numba", "numpy"):
        warm = init(prob, W, alpha=1e-4, backend=backend)
        advance(warm, prob, W, 1, picks=picks[:, :1])
        st = init(prob, W, alpha=1e-4, backend=backend)
        t0 = time.perf_counter()
        advance(st, prob, W, rounds, picks=picks)
        out[backend] = (time.perf_counter() - t0, st.X.copy())
    diff = float(np.abs(out["numba"][1] - out["numpy"][1]).max())
    return {
        "numba_us": 1e6 * out["numba"][0] / rounds,
        "numpy_us": 1e6 * out["numpy"][0] / rounds,
        "speedup": out["numpy"][0] / out["numba"][0],
        "max_diff": diff,
    }


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rounds", type=int, default=20000)
    ap.add_argument("--sizes", default="8x32x10,16x32x10,32x64x20")
    args = ap.parse_args(argv)
    print(f"{'n x m x p':>12} {'numba us/round':>15} {'numpy us/round':>15} {'speedup':>8} {'max |dX|':>10}")
    for spec in args.sizes.split(","):
        n, m, p = (int(v) for v in spec.split("x"))
        r = bench(n, m, p, args.rounds)
        print(f"{spec:>12} {r['numba_us']:15.2f} {r['numpy_us']:15.2f} {r['speedup']:8.1f} {r['max_diff']:10.2e}")


if __name__ == "__main__":
    main()
