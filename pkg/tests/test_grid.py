"""Simplex grid construction and barycentric interpolation."""

import math

import numpy as np
import pytest

from beliefpomdp.errors import ResourceLimit
from beliefpomdp.grid import build_grid, simplex_point_count


class TestConstruction:
    def test_two_state_layout(self):
        grid = build_grid(2, 4)
        expected = [[1.0, 0.0], [0.75, 0.25], [0.5, 0.5], [0.25, 0.75], [0.0, 1.0]]
        assert grid.points.tolist() == expected

    def test_point_counts(self):
        assert build_grid(3, 2).num_points == 6
        for x, m in [(2, 17), (3, 9), (4, 6)]:
            assert build_grid(x, m).num_points == math.comb(m + x - 1, x - 1)
            assert simplex_point_count(x, m) == math.comb(m + x - 1, x - 1)

    def test_resource_cap(self):
        with pytest.raises(ResourceLimit):
            build_grid(3, 2000)
        build_grid(3, 2000, max_points=3_000_000)  # explicit cap raise works

    def test_rows_sum_to_resolution(self):
        grid = build_grid(4, 7)
        assert np.all(grid.coords.sum(axis=1) == 7)
        np.testing.assert_allclose(grid.points.sum(axis=1), 1.0, atol=1e-12)

    def test_index_of_round_trips(self):
        grid = build_grid(3, 12)
        idx = grid.index_of(grid.coords)
        np.testing.assert_array_equal(idx, np.arange(grid.num_points))

    def test_index_of_rejects_non_members(self):
        grid = build_grid(2, 4)
        with pytest.raises(ValueError):
            grid.index_of(np.array([[3, 2]]))

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            build_grid(1, 5)
        with pytest.raises(ValueError):
            build_grid(3, 0)


class TestBarycentric:
    @pytest.mark.parametrize("x,m", [(2, 10), (3, 8), (4, 5)])
    def test_exact_at_grid_points(self, x, m, rng):
        grid = build_grid(x, m)
        vals = rng.normal(size=grid.num_points)
        idx, w = grid.barycentric(grid.points)
        np.testing.assert_array_equal((vals[idx] * w).sum(axis=1), vals)

    @pytest.mark.parametrize("x", [2, 3, 4])
    def test_weights_are_convex_combinations(self, x, rng):
        grid = build_grid(x, 9)
        queries = rng.dirichlet(np.ones(x), size=500)
        idx, w = grid.barycentric(queries)
        assert np.all(w >= 0.0)
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)
        recon = (grid.points[idx] * w[:, :, None]).sum(axis=1)
        np.testing.assert_allclose(recon, queries, atol=1e-9)

    def test_continuity_across_cell_faces(self, rng):
        grid = build_grid(3, 10)
        vals = rng.normal(size=grid.num_points)
        # two-sided limits agree when a segment crosses interior faces
        for _ in range(200):
            a = rng.dirichlet(np.ones(3))
            direction = rng.normal(size=3)
            direction -= direction.mean()  # stay inside the simplex plane
            lo = grid.interpolate(vals, (a - 1e-10 * direction)[None, :])[0]
            hi = grid.interpolate(vals, (a + 1e-10 * direction)[None, :])[0]
            assert abs(hi - lo) < 1e-7

    def test_interpolates_linear_functions_exactly(self, rng):
        grid = build_grid(3, 7)
        coeffs = rng.normal(size=3)
        vals = grid.points @ coeffs
        queries = rng.dirichlet(np.ones(3), size=300)
        np.testing.assert_allclose(
            grid.interpolate(vals, queries), queries @ coeffs, atol=1e-12
        )

    def test_nearest_index_picks_heaviest_vertex(self):
        grid = build_grid(2, 4)
        q = np.array([[0.76, 0.24], [0.01, 0.99]])
        picked = grid.nearest_index(q)
        np.testing.assert_array_equal(grid.points[picked][:, 0], [0.75, 0.0])

    def test_snapping_keeps_near_grid_queries_exact(self, rng):
        grid = build_grid(3, 6)
        vals = rng.normal(size=grid.num_points)
        jitter = rng.uniform(-1e-12, 1e-12, size=grid.points.shape)
        queries = grid.points + jitter
        queries /= queries.sum(axis=1, keepdims=True)
        np.testing.assert_array_equal(grid.interpolate(vals, queries), vals)
