"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-N wall time of each backend
and the speedup. Both backends are fed identical inputs and their outputs
are compared before timing.
"""

import argparse
import timeit

import numpy as np

from ehbec import _kernels_py as fallback
from ehbec.iid import _dp_grid

try:
    from ehbec import _kernels as compiled
except ImportError:
    compiled = None


def cases():
    rng = np.random.default_rng(0)
    e = (rng.random(2_000_000) < 0.5).astype(np.uint8)
    e[0] = 1
    grid = _dp_grid(4001)
    v = fallback.belief_dp_stage(grid, grid, np.zeros_like(grid), 0.5, 64)[0]
    q10 = rng.random(2 ** 10 - 1)
    q16 = rng.random(2 ** 16 - 1)
    return [
        ("epoch_counts n=2e6", "epoch_counts", (e, 10)),
        ("belief_dp_stage 4001 pts", "belief_dp_stage", (grid, grid, v, 0.5, 64)),
        ("fb_tree_rate k=10 +grad", "fb_tree_rate", (q10, 0.5, 10, True)),
        ("fb_tree_rate k=16 +grad", "fb_tree_rate", (q16, 0.5, 16, True)),
    ]


def same(a, b, atol=1e-9):
    if isinstance(a, tuple):
        # the second output of belief_dp_stage is an argmax on a flat top
        return all(same(x, y, atol if i == 0 else 1e-7) for i, (x, y) in enumerate(zip(a, b)))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-9, atol=atol)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if compiled is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':28s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s}")
    for label, name, argv in cases():
        py = getattr(fallback, name)
        t_py = min(timeit.repeat(lambda: py(*argv), number=1, repeat=args.repeat))
        if compiled is None:
            print(f"{label:28s} {t_py:10.4f} {'-':>10s} {'-':>8s}")
            continue
        cy = getattr(compiled, name)
        if not same(py(*argv), cy(*argv)):
            raise SystemExit(f"{name}: backends disagree")
        t_cy = min(timeit.repeat(lambda: cy(*argv), number=1, repeat=args.repeat))
        print(f"{label:28s} {t_py:10.4f} {t_cy:10.4f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
