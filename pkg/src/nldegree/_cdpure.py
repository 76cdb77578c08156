"""Pure-numpy coordinate-descent kernel.

Fallback for :mod:`nldegree._cdcore`; same contract, same sweep order, same
stopping rule, so the two are interchangeable up to float round-off.
"""

import numpy as np


def cd_lasso_gram(G, b, gamma, tol, max_sweeps, kkt_tol, w0=None):
    """Cyclic coordinate descent for min_w sum_j gamma_j*|w_j| + ||y - X w||_2^2.

    Works on the Gram form: G = X'X, b = X'y.  ``gamma`` is the per-coordinate
    penalty vector and ``w0`` an optional warm start.  Returns
    (w, sweeps, converged) where converged means both the per-sweep
    coefficient change dropped below ``tol`` and the KKT residual dropped
    below ``kkt_tol``.
    """
    G = np.ascontiguousarray(G, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    gamma = np.ascontiguousarray(gamma, dtype=float)
    p = b.size
    w = np.zeros(p) if w0 is None else np.array(w0, dtype=float)
    u = G @ w  # u = G @ w, maintained incrementally
    diag = np.diag(G).copy()
    active = diag > 0
    sweeps = 0
    for sweep in range(1, max_sweeps + 1):
        sweeps = sweep
        max_delta = 0.0
        for j in range(p):
            if not active[j]:
                continue
            wj = w[j]
            half = 0.5 * gamma[j]
            rho = b[j] - u[j] + diag[j] * wj
            if rho > half:
                new = (rho - half) / diag[j]
            elif rho < -half:
                new = (rho + half) / diag[j]
            else:
                new = 0.0
            delta = new - wj
            if delta != 0.0:
                w[j] = new
                u += delta * G[:, j]
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if max_delta < tol and _kkt_gap_gram(G, w, u, b, gamma) <= kkt_tol:
            return w, sweeps, True
    return w, sweeps, False


def _kkt_gap_gram(G, w, u, b, gamma):
    grad = 2.0 * (u - b)
    gap = 0.0
    for j in range(b.size):
        if G[j, j] <= 0:
            continue
        if w[j] > 0:
            v = abs(grad[j] + gamma[j])
        elif w[j] < 0:
            v = abs(grad[j] - gamma[j])
        else:
            v = max(0.0, abs(grad[j]) - gamma[j])
        if v > gap:
            gap = v
    return gap
