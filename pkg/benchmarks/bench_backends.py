"""Time the compiled sweep kernel against the numpy fallback.

Usage:  python3 benchmarks/bench_backends.py [sweeps]

Builds representative problems, runs the same number of backup sweeps on
both backends, checks the results agree, and prints a timing table.
"""

import sys
import time

import numpy as np

from beliefpomdp.costs import NonlinearCostSpec
from beliefpomdp.grid import build_grid
from beliefpomdp.kernels import fallback
from beliefpomdp.model import PomdpModel, STOPPING_TIME
from beliefpomdp.solver import build_tables

try:
    from beliefpomdp.kernels import _sweep as compiled
except ImportError:
    compiled = None


def quickest_detection(resolution):
    p = [[1.0, 0.0], [0.1, 0.9]]
    b = [[0.8, 0.2], [0.3, 0.7]]
    model = PomdpModel(
        num_states=2,
        num_actions=2,
        num_observations=(2, 2),
        transition=(p, p),
        observation=(b, b),
        linear_cost=([0.0, 1.0], [0.05, 0.0]),
        discount=1.0,
        model_kind=STOPPING_TIME,
    )
    return model, build_grid(2, resolution)


def three_state(resolution):
    model = PomdpModel(
        num_states=3,
        num_actions=2,
        num_observations=(3, 3),
        transition=(
            [[0.7, 0.2, 0.1], [0.2, 0.6, 0.2], [0.1, 0.3, 0.6]],
            [[0.6, 0.3, 0.1], [0.15, 0.7, 0.15], [0.05, 0.25, 0.7]],
        ),
        observation=(
            [[0.7, 0.2, 0.1], [0.25, 0.5, 0.25], [0.1, 0.2, 0.7]],
        ) * 2,
        linear_cost=([2.0, 1.0, 0.5], [1.8, 0.9, 0.3]),
        nonlinear_cost=NonlinearCostSpec(
            "entropy", alpha=[0.5, 0.5], beta=[0.0, 0.0]
        ),
        discount=0.9,
    )
    return model, build_grid(3, resolution)


def run_sweeps(backend, tables, values, sweeps):
    n = values.size
    out_v = np.empty(n)
    out_a = np.empty(n, dtype=np.int32)
    v = values.copy()
    start = time.perf_counter()
    for _ in range(sweeps):
        backend.backup_sweep(
            v,
            tables.cost,
            tables.sigma,
            tables.vert_idx,
            tables.vert_w,
            tables.has_continuation,
            tables.discount,
            out_v,
            out_a,
        )
        v, out_v = out_v, v
    elapsed = time.perf_counter() - start
    return elapsed, v


def main():
    sweeps = int(sys.argv[1]) if len(sys.argv) > 1 else 200
    cases = [
        ("quickest detection, X=2, M=2000", *quickest_detection(2000)),
        ("quickest detection, X=2, M=10000", *quickest_detection(10_000)),
        ("entropy sensing, X=3, M=100", *three_state(100)),
        ("entropy sensing, X=3, M=300", *three_state(300)),
    ]
    print(f"{sweeps} sweeps per case")
    print(f"{'case':38s} {'points':>8s} {'numpy':>10s} {'cython':>10s} {'speedup':>8s}")
    for label, model, grid in cases:
        tables = build_tables(model, grid)
        v0 = np.zeros(grid.num_points)
        t_numpy, v_numpy = run_sweeps(fallback, tables, v0, sweeps)
        if compiled is None:
            print(f"{label:38s} {grid.num_points:8d} {t_numpy:9.3f}s   (no compiled kernel)")
            continue
        t_cython, v_cython = run_sweeps(compiled, tables, v0, sweeps)
        gap = float(np.max(np.abs(v_numpy - v_cython)))
        assert gap < 1e-10, f"backends disagree by {gap:.3e}"
        print(
            f"{label:38s} {grid.num_points:8d} {t_numpy:9.3f}s {t_cython:9.3f}s "
            f"{t_numpy / t_cython:7.1f}x"
        )


if __name__ == "__main__":
    main()
