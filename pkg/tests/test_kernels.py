"""Compiled and numpy sweep backends must agree."""

import numpy as np
import pytest

from beliefpomdp.grid import build_grid
from beliefpomdp.kernels import BACKEND, fallback
from beliefpomdp.solver import build_tables, sweep_once
from conftest import qd_model, random_model, three_state_general

compiled = pytest.importorskip(
    "beliefpomdp.kernels._sweep", reason="compiled kernel not built"
)


def run_both(tables, values):
    n = tables.cost.shape[1]
    outs = []
    for backend in (compiled, fallback):
        out_v = np.empty(n)
        out_a = np.empty(n, dtype=np.int32)
        backend.backup_sweep(
            values,
            tables.cost,
            tables.sigma,
            tables.vert_idx,
            tables.vert_w,
            tables.has_continuation,
            tables.discount,
            out_v,
            out_a,
        )
        outs.append((out_v, out_a))
    return outs


def test_backend_reports():
    assert BACKEND in ("cython", "numpy")


@pytest.mark.parametrize("case", ["random2", "random3", "stopping", "three_state"])
def test_backends_agree(case, rng):
    if case == "random2":
        model, m = random_model(np.random.default_rng(7), num_states=2), 60
    elif case == "random3":
        model, m = random_model(np.random.default_rng(8), num_states=3), 20
    elif case == "stopping":
        model, m = qd_model(), 80
    else:
        model, m = three_state_general(), 15
    grid = build_grid(model.num_states, m)
    tables = build_tables(model, grid)
    values = rng.normal(size=grid.num_points)
    (v_c, a_c), (v_n, a_n) = run_both(tables, values)
    np.testing.assert_allclose(v_c, v_n, atol=1e-13, rtol=0)
    np.testing.assert_array_equal(a_c, a_n)


def test_backends_agree_over_full_solve():
    model = qd_model()
    grid = build_grid(2, 120)
    tables = build_tables(model, grid)
    v_c = np.zeros(grid.num_points)
    v_n = np.zeros(grid.num_points)
    for _ in range(60):
        (v_c, _), _ = (run_both(tables, v_c)[0], None)
        out_v = np.empty(grid.num_points)
        out_a = np.empty(grid.num_points, dtype=np.int32)
        fallback.backup_sweep(
            v_n,
            tables.cost,
            tables.sigma,
            tables.vert_idx,
            tables.vert_w,
            tables.has_continuation,
            tables.discount,
            out_v,
            out_a,
        )
        v_n = out_v
    np.testing.assert_allclose(v_c, v_n, atol=1e-12, rtol=0)


def test_sweep_once_returns_one_based_actions():
    model = qd_model()
    grid = build_grid(2, 40)
    tables = build_tables(model, grid)
    _, actions = sweep_once(tables, np.zeros(grid.num_points))
    assert set(np.unique(actions)) <= {1, 2}
