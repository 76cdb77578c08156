"""l1-regularized least squares via cyclic coordinate descent.

The inner sweep loop is the hot kernel of the package.  A compiled Cython
implementation is used when available; a pure-numpy twin with identical
semantics is selected at import time otherwise (or when NLDEGREE_PURE=1).
``benchmarks/bench_cd.py`` compares the two.

The objective solved throughout is

    min_w  gamma * ||w||_1 + ||y - X w||_2^2

with the plain (unnormalized) sum-of-squares data term.  At gamma=0 the
problem is ordinary least squares and is routed to LAPACK instead.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NonConvergenceWarning

if os.environ.get("NLDEGREE_PURE"):
    from . import _cdpure as _kernel

    USING_COMPILED_KERNEL = False
else:
    try:
        from . import _cdcore as _kernel  # type: ignore[attr-defined]

        USING_COMPILED_KERNEL = True
    except ImportError:
        from . import _cdpure as _kernel

        USING_COMPILED_KERNEL = False

# Coordinate-descent stopping rule: max coefficient change per sweep below
# CD_TOL and KKT residual below CD_KKT_TOL, within CD_MAX_SWEEPS sweeps.
CD_TOL = 1e-8
CD_MAX_SWEEPS = 10_000
CD_KKT_TOL = 5e-7

# Vanishing relative ridge on the Gram diagonal.  Designs with more columns
# than rows leave the l1 optimum tied along null-space directions, where
# cyclic descent zigzags forever; the ridge breaks the tie while moving the
# returned point by far less than the certificate tolerance.
CD_RIDGE = 1e-8


@dataclass(frozen=True)
class LassoResult:
    coef: np.ndarray
    sweeps: int
    converged: bool


def _gram_objective(G, b, yty, gamma, w):
    return float(gamma @ np.abs(w) + yty - 2.0 * (b @ w) + w @ (G @ w))


def _gram_kkt_gap(G, b, gamma, w):
    grad = 2.0 * (G @ w - b)
    on = w != 0
    gap = 0.0
    if on.any():
        gap = float(np.max(np.abs(grad[on] + gamma[on] * np.sign(w[on]))))
    off = ~on & (np.diag(G) > 0)
    if off.any():
        gap = max(gap, float(np.max(np.abs(grad[off]) - gamma[off])))
    return gap


# Systems up to this many columns go through the exact LARS path; beyond it,
# blocks of coordinate-descent sweeps with active-set polishing.
LARS_MAX_COLS = 64


def _lars_lasso(X, y, gamma):
    """Exact weighted-lasso solution via the LARS homotopy path.

    The overcomplete weak systems (more columns than rows, heavily collinear
    power columns) leave cyclic descent crawling along tied directions; the
    piecewise-linear path solver is exact there.  Weighted penalties reduce
    to the uniform-penalty path by scaling columns: with theta_j =
    gamma_j w_j the objective is ||theta||_1 + ||y - (X_j/gamma_j) theta||^2.
    """
    from sklearn.linear_model import lars_path

    Xt = X / gamma
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, _, coefs = lars_path(
            Xt, y, method="lasso", alpha_min=1.0 / (2.0 * y.size)
        )
    return coefs[:, -1] / gamma


def _active_set_step(G, b, gamma, w):
    """Exact stationarity solve on the current support, sign-checked.

    On the active set A with signs s the optimum satisfies
    G_AA w_A = b_A - gamma_A s / 2; the solve is accepted by the caller only
    when it lowers the objective.
    """
    active = np.flatnonzero(w)
    if active.size == 0:
        return None
    s = np.sign(w[active])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            wa, *_ = scipy.linalg.lstsq(
                G[np.ix_(active, active)],
                b[active] - 0.5 * gamma[active] * s,
                lapack_driver="gelsy",
                check_finite=False,
            )
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
        return None
    if not np.all(np.isfinite(wa)):
        return None
    trial = np.zeros_like(w)
    trial[active] = wa
    flipped = np.sign(wa) * s < 0
    if flipped.any():
        # The fixed-sign solve is only a descent direction inside the sign
        # orthant; stop at the first coefficient that crosses zero and drop it.
        idx = active[flipped]
        alphas = w[idx] / (w[idx] - trial[idx])
        alpha = float(np.min(alphas))
        trial = w + alpha * (trial - w)
        trial[idx[alphas <= alpha + 1e-15]] = 0.0
    return trial


def lasso(X, y, gamma, tol: float = CD_TOL,
          max_sweeps: int = CD_MAX_SWEEPS, warn: bool = True) -> LassoResult:
    """Minimize sum_j gamma_j |w_j| + ||y - Xw||_2^2 over w.

    ``gamma`` may be a scalar or a per-coefficient penalty vector.  Cyclic
    coordinate-descent sweeps discover the support; between blocks of sweeps
    an exact stationarity solve on the active set accelerates the tail,
    which plain cyclic descent traverses slowly when the design has more
    columns than rows.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (X.shape[1],)).copy()
    if np.any(gamma < 0):
        raise ValueError("gamma must be nonnegative")
    if not gamma.any():
        coef = lstsq(X, y)
        return LassoResult(coef, 0, True)
    G = X.T @ X
    b = X.T @ y
    yty = float(y @ y)

    warm = None
    if X.shape[1] <= LARS_MAX_COLS and np.all(gamma > 0):
        w = _lars_lasso(X, y, gamma)
        if _gram_kkt_gap(G, b, gamma, w) <= CD_KKT_TOL:
            return LassoResult(w, 0, True)
        # fall through to sweeps, warm-started from the path solution
        warm = w

    diag = np.diag(G)
    if diag.any():
        G[np.diag_indices_from(G)] += CD_RIDGE * float(diag.max())

    # Penalty continuation: start where the all-zero solution is optimal and
    # shrink the penalties geometrically to their targets, warm-starting each
    # stage.  Cold-started descent activates far too many columns at small
    # penalties and then crawls along the rank-deficient directions.
    penalized = gamma > 0
    ratios = 2.0 * np.abs(b[penalized]) / gamma[penalized]
    tau0 = float(ratios.max(initial=0.0))
    if tau0 > 1.0:
        n_stages = min(12, max(1, int(np.ceil(np.log(tau0) / np.log(3.0)))))
        taus = np.geomspace(tau0, 1.0, n_stages + 1)[1:]
    else:
        taus = np.array([1.0])

    w = warm
    total_sweeps = 0
    converged = False
    for tau in taus:
        stage_gamma = np.where(penalized, tau * gamma, 0.0)
        stage_tol = CD_KKT_TOL if tau == 1.0 else max(CD_KKT_TOL, 1e-3 * tau)
        stage_done = False
        while total_sweeps < max_sweeps:
            w, sweeps, stage_done = _kernel.cd_lasso_gram(
                G, b, stage_gamma, tol, min(50, max_sweeps - total_sweeps),
                stage_tol, w,
            )
            w = np.asarray(w)
            total_sweeps += sweeps
            if stage_done:
                break
            trial = _active_set_step(G, b, stage_gamma, w)
            if trial is not None and (
                _gram_objective(G, b, yty, stage_gamma, trial)
                <= _gram_objective(G, b, yty, stage_gamma, w)
            ):
                w = trial
                if _gram_kkt_gap(G, b, stage_gamma, w) <= stage_tol:
                    stage_done = True
                    break
        if tau == 1.0:
            converged = stage_done
    if not converged and warn:
        warnings.warn(
            f"coordinate descent stopped after {total_sweeps} sweeps "
            f"without meeting its tolerance",
            NonConvergenceWarning,
            stacklevel=2,
        )
    return LassoResult(w, total_sweeps, bool(converged))


def kkt_gap(X, y, gamma, coef) -> float:
    """Max violation of the subgradient optimality conditions.

    For the smooth-part gradient g = -2 X'(y - Xw): zero coefficients need
    |g_j| <= gamma_j, nonzero ones need g_j + gamma_j*sign(w_j) = 0.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    coef = np.asarray(coef, dtype=float)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (X.shape[1],))
    grad = -2.0 * (X.T @ (y - X @ coef))
    gap = 0.0
    for j, wj in enumerate(coef):
        if not np.any(X[:, j]):
            continue
        if wj > 0:
            v = abs(grad[j] + gamma[j])
        elif wj < 0:
            v = abs(grad[j] - gamma[j])
        else:
            v = max(0.0, abs(grad[j]) - gamma[j])
        gap = max(gap, v)
    return gap


def lstsq(X, y) -> np.ndarray:
    """Least squares via QR with column pivoting (rank revealing)."""
    if X.shape[1] == 0:
        return np.zeros(0)
    coef, *_ = scipy.linalg.lstsq(X, y, lapack_driver="gelsy", check_finite=False)
    return coef


def solve_gram(X, y) -> np.ndarray:
    """Least squares through the normal equations; falls back to lstsq.

    Much faster than QR/SVD for tall thin design matrices; the tiny diagonal
    jitter keeps the Cholesky factorization alive for nearly dependent
    columns without moving the solution at the tolerances used here.
    """
    G = X.T @ X
    b = X.T @ y
    jitter = 1e-12 * float(np.max(np.diag(G)) if G.size else 0.0)
    try:
        c, low = scipy.linalg.cho_factor(
            G + jitter * np.eye(G.shape[0]), check_finite=False
        )
        return scipy.linalg.cho_solve((c, low), b, check_finite=False)
    except np.linalg.LinAlgError:
        return lstsq(X, y)
    except scipy.linalg.LinAlgError:
        return lstsq(X, y)
