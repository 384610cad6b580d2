"""Pure-numpy backup sweep, used when the compiled kernel is unavailable."""

import numpy as np


def backup_sweep(
    values,
    cost,
    sigma,
    vert_idx,
    vert_w,
    has_continuation,
    discount,
    out_values,
    out_actions,
):
    """One synchronous sweep: out_values[n] = min_u Q(n, u), ties to smaller u.

    Accumulation order matches the compiled kernel (observations in
    ascending order, vertices left to right) so the two backends agree to
    rounding.
    """
    num_actions, num_points = cost.shape
    num_obs = sigma.shape[1]
    q = np.empty((num_actions, num_points))
    for u in range(num_actions):
        q[u] = cost[u]
        if has_continuation[u]:
            cont = np.zeros(num_points)
            for y in range(num_obs):
                interp = (vert_w[u, y] * values[vert_idx[u, y]]).sum(axis=1)
                cont += sigma[u, y] * interp
            q[u] += discount * cont
    np.min(q, axis=0, out=out_values)
    out_actions[:] = np.argmin(q, axis=0)
