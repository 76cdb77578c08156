# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled coordinate-descent kernel (Gram form).

Mirrors nldegree._cdpure.cd_lasso_gram exactly: same sweep order, same
stopping rule, so results agree up to float round-off.
"""

import numpy as np

from libc.math cimport fabs


def cd_lasso_gram(G, b, gamma, double tol, int max_sweeps, double kkt_tol, w0=None):
    cdef double[:, ::1] Gm = np.ascontiguousarray(G, dtype=np.float64)
    cdef double[::1] bm = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[::1] gm = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef Py_ssize_t p = bm.shape[0]
    w_arr = np.zeros(p) if w0 is None else np.array(w0, dtype=np.float64)
    u_arr = np.asarray(G) @ w_arr
    cdef double[::1] w = w_arr
    cdef double[::1] u = u_arr
    cdef Py_ssize_t sweep, j, k
    cdef double wj, rho, new, delta, max_delta, djj, half
    cdef int sweeps = 0

    for sweep in range(1, max_sweeps + 1):
        sweeps = sweep
        max_delta = 0.0
        for j in range(p):
            djj = Gm[j, j]
            if djj <= 0.0:
                continue
            wj = w[j]
            half = 0.5 * gm[j]
            rho = bm[j] - u[j] + djj * wj
            if rho > half:
                new = (rho - half) / djj
            elif rho < -half:
                new = (rho + half) / djj
            else:
                new = 0.0
            delta = new - wj
            if delta != 0.0:
                w[j] = new
                for k in range(p):
                    u[k] += delta * Gm[k, j]
                if fabs(delta) > max_delta:
                    max_delta = fabs(delta)
        if max_delta < tol and _kkt_gap(Gm, w, u, bm, gm) <= kkt_tol:
            return w_arr, sweeps, True
    return w_arr, sweeps, False


cdef double _kkt_gap(double[:, ::1] G, double[::1] w, double[::1] u,
                     double[::1] b, double[::1] gamma):
    cdef Py_ssize_t p = b.shape[0]
    cdef Py_ssize_t j
    cdef double gap = 0.0, grad, v
    for j in range(p):
        if G[j, j] <= 0.0:
            continue
        grad = 2.0 * (u[j] - b[j])
        if w[j] > 0.0:
            v = fabs(grad + gamma[j])
        elif w[j] < 0.0:
            v = fabs(grad - gamma[j])
        else:
            v = fabs(grad) - gamma[j]
            if v < 0.0:
                v = 0.0
        if v > gap:
            gap = v
    return gap
