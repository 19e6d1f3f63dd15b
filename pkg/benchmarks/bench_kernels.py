"""Benchmark the hot kernels: numba-compiled twins vs the numpy/python
reference path.

Both backends implement identical arithmetic, so outputs are asserted
bitwise-equal on shared inputs before any timing is reported. Run with

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from vtspot.kernels import _reference


def _rect(rng):
    x0, y0 = rng.uniform(0.0, 50.0, size=2)
    w, h = rng.uniform(0.5, 10.0, size=2)
    return np.array(
        [[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]], dtype=np.float64
    )


def _workloads(rng):
    grid = rng.normal(size=(256, 256, 8))
    dx = rng.uniform(-3.0, 3.0, size=(256, 256))
    dy = rng.uniform(-3.0, 3.0, size=(256, 256))
    quads = [(_rect(rng), _rect(rng)) for _ in range(5000)]
    cost = rng.uniform(0.0, 100.0, size=(200, 200))
    return grid, dx, dy, quads, cost


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per kernel; best is reported")
    args = parser.parse_args()

    try:
        from vtspot.kernels import _jit
    except ImportError:
        print("numba is not importable; nothing to compare against")
        return 1

    rng = np.random.default_rng(42)
    grid, dx, dy, quads, cost = _workloads(rng)

    # Warm the JIT caches so compilation stays out of the timings, and
    # check bitwise agreement on the exact benchmark inputs.
    assert np.array_equal(_jit.bilinear_warp(grid, dx, dy),
                          _reference.bilinear_warp(grid, dx, dy))
    for a, b in quads[:100]:
        assert _jit.convex_clip_area(a, b) == _reference.convex_clip_area(a, b)
    assert np.array_equal(_jit.solve_assignment(cost),
                          _reference.solve_assignment(cost))
    print("backend agreement: bitwise-identical outputs on all three kernels")
    print()

    def clip_all(module):
        total = 0.0
        for a, b in quads:
            total += module.convex_clip_area(a, b)
        return total

    rows = [
        ("bilinear_warp (256x256x8)",
         _time(lambda: _reference.bilinear_warp(grid, dx, dy), args.repeats),
         _time(lambda: _jit.bilinear_warp(grid, dx, dy), args.repeats)),
        ("convex_clip_area (5000 pairs)",
         _time(lambda: clip_all(_reference), args.repeats),
         _time(lambda: clip_all(_jit), args.repeats)),
        ("solve_assignment (200x200)",
         _time(lambda: _reference.solve_assignment(cost), args.repeats),
         _time(lambda: _jit.solve_assignment(cost), args.repeats)),
    ]

    header = f"{'kernel':<32} {'numpy (s)':>12} {'numba (s)':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, t_ref, t_jit in rows:
        print(f"{name:<32} {t_ref:>12.6f} {t_jit:>12.6f} {t_ref / t_jit:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
