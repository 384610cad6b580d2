"""Uniform lattice discretization of the belief simplex.

Grid points are the beliefs with coordinates k_i / M, sum k_i = M.  Query
points are located inside a Freudenthal-style triangulation expressed in
reverse-cumulative coordinates z_i = M * sum_{j >= i} pi(j); sorting the
fractional parts of z yields at most X enclosing vertices and their
barycentric weights.  Interpolation is exact at grid points and
continuous across cell boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimit

DEFAULT_MAX_POINTS = 2_000_000

#: coordinates this close to an integer snap onto it before cell location
SNAP_TOL = 1e-9


def simplex_point_count(num_states: int, resolution: int) -> int:
    return math.comb(resolution + num_states - 1, num_states - 1)


@dataclass(frozen=True)
class SimplexGrid:
    """All beliefs with coordinates k/M, plus the interpolation machinery.

    ``points[n]`` is the n-th grid belief; points are ordered so that for
    X = 2 the second coordinate increases with n.  ``coords`` holds the
    integer vectors k, and ``keys`` their mixed-radix encoding, sorted
    ascending for binary-search lookup.
    """

    num_states: int
    resolution: int
    points: np.ndarray
    coords: np.ndarray
    keys: np.ndarray

    @property
    def num_points(self) -> int:
        return self.points.shape[0]

    def _encode(self, coords: np.ndarray) -> np.ndarray:
        base = self.resolution + 1
        weights = base ** np.arange(self.num_states, dtype=np.int64)
        return coords.astype(np.int64) @ weights

    def index_of(self, coords: np.ndarray) -> np.ndarray:
        """Flat indices of integer coordinate vectors (must be grid members)."""
        coords = np.atleast_2d(coords)
        keys = self._encode(coords)
        pos = np.searchsorted(self.keys, keys)
        if np.any(pos >= self.keys.size) or np.any(self.keys[np.minimum(pos, self.keys.size - 1)] != keys):
            raise ValueError("coordinate vector is not a grid point")
        return pos

    def barycentric(self, queries: np.ndarray):
        """Enclosing vertex indices and weights for each query belief.

        Returns (indices, weights), both shaped (n_queries, X); weights
        are nonnegative and sum to one per row.  Vertices with zero
        weight are replaced by the cell base point so every index is
        valid.
        """
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        n, x = q.shape
        if x != self.num_states:
            raise ValueError(f"queries have dimension {x}, grid has {self.num_states}")
        m = self.resolution

        # z[:, i] = M * sum_{j>=i} pi_j for i = 1..X-1 (z for i=0 would be
        # identically M and carries no information)
        tails = np.cumsum(q[:, ::-1], axis=1)[:, ::-1]
        z = m * tails[:, 1:]
        z = np.clip(z, 0.0, float(m))
        nearest = np.rint(z)
        snap = np.abs(z - nearest) <= SNAP_TOL
        z = np.where(snap, nearest, z)

        base = np.floor(z)
        frac = z - base
        d = x - 1
        # descending fractional parts; ties resolve toward the earlier
        # coordinate, which keeps every intermediate vertex monotone
        order = np.argsort(-frac, axis=1, kind="stable")
        frac_sorted = np.take_along_axis(frac, order, axis=1)

        weights = np.empty((n, x))
        weights[:, 0] = 1.0 - frac_sorted[:, 0]
        if d > 1:
            weights[:, 1:d] = frac_sorted[:, :-1] - frac_sorted[:, 1:]
        weights[:, d] = frac_sorted[:, d - 1]
        np.clip(weights, 0.0, 1.0, out=weights)

        # vertex v_k adds unit steps to the base along the first k sorted axes
        steps = np.zeros((n, x, d))
        rows = np.repeat(np.arange(n), d)
        level = np.tile(np.arange(1, d + 1), n)
        steps[rows, level, order.ravel()] = 1.0
        np.cumsum(steps, axis=1, out=steps)
        zvert = base[:, None, :] + steps

        # back to integer grid coordinates: k_1 = M - z_2, k_i = z_i - z_{i+1}
        kvert = np.empty((n, x, x))
        kvert[:, :, 0] = m - zvert[:, :, 0]
        if d > 1:
            kvert[:, :, 1:d] = zvert[:, :, :-1] - zvert[:, :, 1:]
        kvert[:, :, d] = zvert[:, :, d - 1]

        tiny = weights <= 1e-15
        kvert[tiny] = np.broadcast_to(
            kvert[:, :1, :], kvert.shape
        )[tiny]
        weights[tiny] = 0.0
        weights /= weights.sum(axis=1, keepdims=True)

        idx = self.index_of(kvert.reshape(-1, x).astype(np.int64)).reshape(n, x)
        return idx, weights

    def interpolate(self, values: np.ndarray, queries: np.ndarray) -> np.ndarray:
        idx, w = self.barycentric(queries)
        return (values[idx] * w).sum(axis=1)

    def nearest_index(self, queries: np.ndarray) -> np.ndarray:
        """Index of the enclosing-cell vertex with the largest weight."""
        idx, w = self.barycentric(queries)
        pick = np.argmax(w, axis=1)
        return idx[np.arange(idx.shape[0]), pick]


def build_grid(
    num_states: int, resolution: int, max_points: int = DEFAULT_MAX_POINTS
) -> SimplexGrid:
    """Uniform simplex grid of the given resolution.

    Raises ResourceLimit before allocating anything when the point count
    would exceed ``max_points``.
    """
    if num_states < 2:
        raise ValueError("num_states must be >= 2")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    count = simplex_point_count(num_states, resolution)
    if count > max_points:
        raise ResourceLimit(
            f"grid would have {count} points, cap is {max_points}; "
            f"reduce the resolution"
        )
    coords = _compositions(num_states, resolution)
    base = resolution + 1
    weights = base ** np.arange(num_states, dtype=np.int64)
    keys = coords.astype(np.int64) @ weights
    order = np.argsort(keys)
    coords = np.ascontiguousarray(coords[order])
    keys = keys[order]
    points = coords.astype(float) / resolution
    points.setflags(write=False)
    coords.setflags(write=False)
    keys.setflags(write=False)
    return SimplexGrid(
        num_states=num_states,
        resolution=resolution,
        points=points,
        coords=coords,
        keys=keys,
    )


def _compositions(parts: int, total: int) -> np.ndarray:
    """All nonnegative integer vectors of the given length summing to total."""
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    blocks = []
    for first in range(total + 1):
        rest = _compositions(parts - 1, total - first)
        head = np.full((rest.shape[0], 1), first, dtype=np.int64)
        blocks.append(np.hstack([head, rest]))
    return np.vstack(blocks)
