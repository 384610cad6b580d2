# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled backup sweep for belief-grid value iteration."""


def backup_sweep(const double[::1] values,
                 const double[:, ::1] cost,
                 const double[:, :, ::1] sigma,
                 const int[:, :, :, ::1] vert_idx,
                 const double[:, :, :, ::1] vert_w,
                 const unsigned char[::1] has_continuation,
                 double discount,
                 double[::1] out_values,
                 int[::1] out_actions):
    """One synchronous sweep: out_values[n] = min_u Q(n, u), ties to smaller u.

    ``sigma`` rows that are zero (padded or impossible observations)
    contribute nothing.  ``out_actions`` receives 0-based argmin indices.
    """
    cdef Py_ssize_t num_actions = cost.shape[0]
    cdef Py_ssize_t num_obs = sigma.shape[1]
    cdef Py_ssize_t num_points = cost.shape[1]
    cdef Py_ssize_t num_vertices = vert_idx.shape[3]
    cdef Py_ssize_t n, u, y, j
    cdef double q, best, cont, acc, s
    cdef int best_u

    with nogil:
        for n in range(num_points):
            best = 0.0
            best_u = 0
            for u in range(num_actions):
                q = cost[u, n]
                if has_continuation[u]:
                    cont = 0.0
                    for y in range(num_obs):
                        s = sigma[u, y, n]
                        if s > 0.0:
                            acc = 0.0
                            for j in range(num_vertices):
                                acc = acc + vert_w[u, y, n, j] * values[vert_idx[u, y, n, j]]
                            cont = cont + s * acc
                    q = q + discount * cont
                if u == 0 or q < best:
                    best = q
                    best_u = <int> u
            out_values[n] = best
            out_actions[n] = best_u
