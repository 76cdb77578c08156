"""Data-driven extraction of oscillatory components.

A component a(t)*cos(theta(t)) is fitted by alternating between an envelope
solve over an overcomplete Fourier basis evaluated in phase coordinates and
a phase correction derived from the fitted quadrature pair.  Components are
peeled off a residual one at a time; an optional low-order periodic waveform
("shape") per component absorbs harmonic / intra-wave content that the
band-limited envelope basis cannot represent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.signal

from .errors import (
    DecompositionError,
    GridMismatchError,
    IllConditionedPhaseWarning,
    IllConditionedShapeError,
    InsufficientOscillationError,
    NonConvergenceWarning,
    PhaseInitError,
)
from .odelab import TOL_FREQ
from .series import (
    Imf,
    TimeSeries,
    _derivative,
    cumulative_integral,
    evaluate_imf,
    shape_waveform,
)
from .solvers import lasso, lstsq, solve_gram

# A peeled component must shrink the residual l2 norm by at least this
# fraction; otherwise the remainder is considered non-oscillatory (e.g. a
# trend) and peeling stops.
MIN_RELATIVE_REDUCTION = 0.01

SHAPE_COND_LIMIT = 1e10


@dataclass(frozen=True)
class PhaseDictionary:
    """Overcomplete Fourier basis attached to a phase iterate.

    Basis functions are 1, cos(k*theta/(2L)), sin(k*theta/(2L)) for
    1 <= k <= floor(2*smoothness*L), L = floor(phase span / 2pi).  The
    smoothness parameter (<= 1/2) caps how oscillatory envelopes may be
    relative to the carrier cos(theta).
    """

    theta: TimeSeries
    smoothness: float = 0.5

    def __post_init__(self):
        if not 0 < self.smoothness <= 0.5:
            raise ValueError("smoothness must lie in (0, 1/2]")
        if self.L_theta < 1:
            raise InsufficientOscillationError(
                "phase spans less than one full oscillation"
            )

    @property
    def L_theta(self) -> int:
        span = self.theta.values[-1] - self.theta.values[0]
        return int(np.floor(span / (2.0 * np.pi) + 1e-9))


@dataclass(frozen=True)
class DecompositionConfig:
    gamma: float = 1.0
    epsilon0: float | None = None  # None -> 0.01 * ||signal||_2
    max_imfs: int = 5
    max_outer_iters: int = 50
    phase_tol: float = 1e-3
    smoothness: float = 0.5
    shape_order: int = 8

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.epsilon0 is not None and self.epsilon0 < 0:
            raise ValueError("epsilon0 must be nonnegative")
        if self.max_imfs < 1:
            raise ValueError("max_imfs must be at least 1")
        if self.max_outer_iters < 1 or self.phase_tol < 0:
            raise ValueError("iteration limits must be nonnegative")
        if not 0 < self.smoothness <= 0.5:
            raise ValueError("smoothness must lie in (0, 1/2]")
        if self.shape_order < 0:
            raise ValueError("shape_order must be nonnegative")


@dataclass(frozen=True)
class ShapeFit:
    """Truncated Fourier coefficients of a 2pi-periodic waveform."""

    order: int
    coefficients: np.ndarray  # c_j for j = -order..order

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=complex)
        if self.order < 1 or coeffs.size != 2 * self.order + 1:
            raise ValueError("need coefficients for j = -order..order")
        if not np.allclose(coeffs, coeffs[::-1].conj(), atol=1e-10):
            raise ValueError("coefficients must satisfy c_{-j} = conj(c_j)")
        object.__setattr__(self, "coefficients", coeffs)


@dataclass(frozen=True)
class ImfFit(Imf):
    """Extracted component plus the fit metadata behind it.

    ``cos_coefficients``/``sin_coefficients`` expand the quadrature envelope
    pair over the basis built from ``basis_phase``; amplitude and phase are
    derived from them, so the component is exactly representable in its own
    dictionary.
    """

    cos_coefficients: np.ndarray | None = None
    sin_coefficients: np.ndarray | None = None
    basis_phase: TimeSeries | None = None
    smoothness: float = 0.5
    converged: bool = True
    iterations: int = 0
    residual_norm: float = float("nan")
    clipped_fraction: float = 0.0


def basis_matrix(theta: np.ndarray, smoothness: float) -> np.ndarray:
    span = theta[-1] - theta[0]
    L = int(np.floor(span / (2.0 * np.pi) + 1e-9))
    if L < 1:
        raise InsufficientOscillationError(
            f"phase span {span:.3g} rad covers less than one oscillation"
        )
    kmax = int(np.floor(2.0 * smoothness * L + 1e-9))
    cols = np.empty((theta.size, 1 + 2 * kmax))
    cols[:, 0] = 1.0
    scaled = theta / (2.0 * L)
    for k in range(1, kmax + 1):
        cols[:, 2 * k - 1] = np.cos(k * scaled)
        cols[:, 2 * k] = np.sin(k * scaled)
    return cols


def build_basis(dictionary: PhaseDictionary, grid: TimeSeries) -> np.ndarray:
    """Sample the dictionary's basis functions on the given grid."""
    if not dictionary.theta.same_grid(grid):
        raise GridMismatchError("phase iterate is not sampled on the grid")
    return basis_matrix(dictionary.theta.values, dictionary.smoothness)


def init_phase(signal: TimeSeries) -> TimeSeries:
    """Initial strictly increasing phase from spectral peak + extrema count.

    The dominant discrete-Fourier frequency (after removing a straight-line
    trend) sets the expected period; local maxima at least half a period
    apart then pin the phase to multiples of 2pi, interpolated linearly in
    between and extrapolated with the edge slopes.
    """
    values = signal.values
    t = signal.t
    coeffs = np.polynomial.polynomial.polyfit(t, values, 1)
    detrended = values - np.polynomial.polynomial.polyval(t, coeffs)
    spectrum = np.abs(np.fft.rfft(detrended))
    if spectrum.size < 2:
        raise PhaseInitError("signal too short for a spectral estimate")
    k_dom = 1 + int(np.argmax(spectrum[1:]))
    f_dom = k_dom / (signal.n * signal.dt)
    min_dist = max(1, int(round(0.5 / (f_dom * signal.dt))))
    peaks, _ = scipy.signal.find_peaks(values, distance=min_dist)
    if peaks.size < 3:
        raise PhaseInitError(
            f"found {peaks.size} local maxima, need at least 3"
        )
    t_peaks = t[peaks]
    theta_peaks = 2.0 * np.pi * np.arange(peaks.size)
    theta = np.interp(t, t_peaks, theta_peaks)
    slope_left = 2.0 * np.pi / (t_peaks[1] - t_peaks[0])
    slope_right = 2.0 * np.pi / (t_peaks[-1] - t_peaks[-2])
    left = t < t_peaks[0]
    right = t > t_peaks[-1]
    theta[left] = slope_left * (t[left] - t_peaks[0])
    theta[right] = theta_peaks[-1] + slope_right * (t[right] - t_peaks[-1])
    return signal.with_values(theta)


def _envelope_solve(theta, y, smoothness, gamma):
    """Fit y ~ b1(theta) cos(theta) + b2(theta) sin(theta), b1, b2 in the basis."""
    V = basis_matrix(theta, smoothness)
    m = V.shape[1]
    ct = np.cos(theta)
    st = np.sin(theta)
    X = np.empty((theta.size, 2 * m))
    X[:, :m] = V * ct[:, None]
    X[:, m:] = V * st[:, None]
    if gamma == 0.0:
        coef = solve_gram(X, y)
        cd_ok = True
    else:
        res = lasso(X, y, gamma, warn=False)
        coef = res.coef
        cd_ok = res.converged
    b1 = V @ coef[:m]
    b2 = V @ coef[m:]
    fitted = b1 * ct + b2 * st
    return V, coef, b1, b2, fitted, cd_ok


def _phase_correction(V, b1, b2, dt):
    """Smoothed phase offset of the quadrature pair and its derivative."""
    db1 = _derivative(b1, dt, 1)
    db2 = _derivative(b2, dt, 1)
    denom = b1 * b1 + b2 * b2
    floor = max(float(denom.max()), 1e-300) * 1e-2
    phi_dot = (b1 * db2 - b2 * db1) / np.maximum(denom, floor)
    phi_dot_s = V @ solve_gram(V, phi_dot)
    phi_s = cumulative_integral(phi_dot_s, dt)
    phi_raw = np.unwrap(np.arctan2(b2, b1))
    phi_s += np.median(phi_raw - phi_s)
    return phi_s, phi_dot_s


def _monotone_phase(theta, dt):
    """Clip the phase slope at TOL_FREQ and reintegrate if needed."""
    omega = _derivative(theta, dt, 1)
    n_clip = int(np.count_nonzero(omega < TOL_FREQ))
    if n_clip:
        omega = np.maximum(omega, TOL_FREQ)
        theta = theta[0] + cumulative_integral(omega, dt)
    return theta, n_clip


def extract_imf(signal: TimeSeries, cfg: DecompositionConfig | None = None) -> ImfFit:
    """Extract the dominant oscillatory component of a signal.

    Alternates (i) an l1-regularized (or plain, at gamma=0) linear solve for
    the quadrature envelope pair over the current phase's basis with (ii) a
    phase update that integrates the smoothed derivative of
    arctan(b2/b1), projected onto the basis, with the slope kept positive by
    clipping.  Stops when the sup-norm phase change drops below
    ``phase_tol``; otherwise returns the best iterate seen, flagged
    non-converged.
    """
    cfg = cfg or DecompositionConfig()
    theta = init_phase(signal).values
    dt = signal.dt
    y = signal.values
    best = None
    converged = False
    final_pass = False
    clipped_fraction = 0.0
    cd_all_ok = True
    iterations = 0
    for iterations in range(1, cfg.max_outer_iters + 1):
        V, coef, b1, b2, fitted, cd_ok = _envelope_solve(
            theta, y, cfg.smoothness, cfg.gamma
        )
        cd_all_ok &= cd_ok
        res_norm = float(np.linalg.norm(y - fitted))
        if best is None or res_norm < best[0]:
            best = (res_norm, theta.copy(), coef, b1, b2, V.shape[1])
        if final_pass:
            converged = True
            break
        phi_s, phi_dot_s = _phase_correction(V, b1, b2, dt)
        omega = _derivative(theta, dt, 1)
        pos = phi_dot_s > 0
        eta = 1.0
        if np.any(pos):
            eta = min(1.0, 0.5 * float(np.min(omega[pos] / phi_dot_s[pos])))
            eta = max(eta, 0.0)
        theta_new = theta - eta * phi_s
        theta_new, n_clip = _monotone_phase(theta_new, dt)
        clipped_fraction = n_clip / theta.size
        if float(np.max(np.abs(theta_new - theta))) < cfg.phase_tol:
            final_pass = True
        theta = theta_new

    res_norm, theta_b, coef, b1, b2, m = best
    amplitude = np.hypot(b1, b2)
    amplitude = np.maximum(amplitude, max(float(amplitude.max()), 1e-12) * 1e-15)
    phase = theta_b - np.unwrap(np.arctan2(b2, b1))
    phase = np.maximum.accumulate(phase)
    if clipped_fraction > 0.10:
        warnings.warn(
            f"frequency clipping active on {clipped_fraction:.0%} of samples",
            IllConditionedPhaseWarning,
            stacklevel=2,
        )
    if not converged:
        warnings.warn(
            f"phase iteration did not converge in {iterations} passes",
            NonConvergenceWarning,
            stacklevel=2,
        )
    return ImfFit(
        amplitude=signal.with_values(amplitude),
        phase=signal.with_values(phase),
        shape=None,
        cos_coefficients=coef[:m],
        sin_coefficients=coef[m:],
        basis_phase=signal.with_values(theta_b),
        smoothness=cfg.smoothness,
        converged=converged and cd_all_ok,
        iterations=iterations,
        residual_norm=res_norm,
        clipped_fraction=clipped_fraction,
    )


def _shape_design(amplitude, theta, order):
    cols = np.empty((theta.size, 2 * order + 1))
    cols[:, 0] = amplitude
    for j in range(1, order + 1):
        cols[:, 2 * j - 1] = amplitude * np.cos(j * theta)
        cols[:, 2 * j] = amplitude * np.sin(j * theta)
    return cols


def _coefficients_from_real(coef):
    order = (coef.size - 1) // 2
    out = np.zeros(2 * order + 1, dtype=complex)
    out[order] = coef[0]
    for j in range(1, order + 1):
        cj = 0.5 * (coef[2 * j - 1] - 1j * coef[2 * j])
        out[order + j] = cj
        out[order - j] = np.conj(cj)
    return out


def _shape_alternations_dt(y, amplitude, theta, dt, order, smoothness,
                           passes: int = 3):
    """Alternate shape-coefficient fits with phase refreshes.

    Returns (theta, complex coefficients).  Raises IllConditionedShapeError
    when the waveform design matrix is numerically rank deficient.
    """
    theta = np.asarray(theta, dtype=float).copy()
    coef = None
    for k in range(passes):
        design = _shape_design(amplitude, theta, order)
        if k == 0 and np.linalg.cond(design) > SHAPE_COND_LIMIT:
            raise IllConditionedShapeError(
                "waveform design matrix condition number exceeds 1e10"
            )
        coef = lstsq(design, y)
        if k == passes - 1:
            break
        # Phase refresh against the fitted waveform: remove every harmonic
        # except the fundamental, then rerun the quadrature phase update.
        non_fund = design @ coef
        non_fund -= coef[1] * design[:, 1] + coef[2] * design[:, 2]
        y_fund = y - non_fund
        V, _, b1, b2, _, _ = _envelope_solve(theta, y_fund, smoothness, 0.0)
        phi_s, _ = _phase_correction(V, b1, b2, dt)
        theta, _ = _monotone_phase(theta - phi_s, dt)
    return theta, _coefficients_from_real(coef)


def fit_shape_function(signal: TimeSeries, imf: Imf, order: int) -> ShapeFit:
    """Recover periodic-waveform Fourier coefficients for a component.

    Least-squares fit of hermitian coefficients c_j minimizing
    ||signal - a * sum_j c_j exp(i j theta)||_2 (rank-revealing
    factorization), alternated three times with a phase refresh against the
    fitted waveform.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    if not signal.same_grid(imf.phase):
        raise GridMismatchError("signal and component grids differ")
    span = imf.phase.values[-1] - imf.phase.values[0]
    if span < 3.0 * (2 * order + 1) * np.pi:
        raise IllConditionedShapeError(
            f"phase span {span:.3g} rad is too short to condition "
            f"a shape fit of order {order}"
        )
    smoothness = getattr(imf, "smoothness", 0.5)
    _, coeffs = _shape_alternations_dt(
        signal.values, imf.amplitude.values, imf.phase.values,
        signal.dt, order, smoothness,
    )
    return ShapeFit(order, coeffs)


def attach_shape(signal_values: np.ndarray, fit: ImfFit, order: int,
                 require_span: bool = True) -> ImfFit:
    """Return the fit augmented with a waveform shape (and refreshed phase).

    Falls back to the unmodified fit when the data cannot support the
    requested order; reduces the order first when only conditioning blocks
    it.  ``require_span`` enforces the conservative phase-span rule used by
    the public shape op; per-window callers disable it and rely on the
    conditioning check alone.
    """
    span = fit.phase.values[-1] - fit.phase.values[0]
    order = int(order)
    if require_span:
        while order >= 1 and span < 3.0 * (2 * order + 1) * np.pi:
            order -= 1
    dt = fit.phase.dt
    while order >= 1:
        try:
            theta, coeffs = _shape_alternations_dt(
                signal_values, fit.amplitude.values, fit.phase.values,
                dt, order, fit.smoothness,
            )
        except IllConditionedShapeError:
            order -= 1
            continue
        phase = fit.phase.with_values(np.maximum.accumulate(theta))
        shaped = replace(fit, phase=phase, shape=coeffs)
        resid = signal_values - evaluate_imf(shaped).values
        shaped = replace(shaped, residual_norm=float(np.linalg.norm(resid)))
        if shaped.residual_norm <= fit.residual_norm:
            return shaped
        return fit
    return fit


def harmonic_component(y: np.ndarray, theta: np.ndarray, smoothness: float,
                       order: int) -> tuple[np.ndarray, int]:
    """Least-squares component with per-harmonic quadrature envelopes.

    The fundamental gets a full envelope pair over the phase basis; each
    higher harmonic gets a constant-plus-linear-drift quadrature pair, enough
    for slowly modulated waveforms while keeping the parameter count (and
    hence the amount of noise the fit can absorb) small.  Returns the fitted
    samples and the parameter count.
    """
    V = basis_matrix(theta, smoothness)
    m = V.shape[1]
    n = theta.size
    drift = np.linspace(-1.0, 1.0, n)
    cols = [V * np.cos(theta)[:, None], V * np.sin(theta)[:, None]]
    for j in range(2, order + 1):
        cj = np.cos(j * theta)
        sj = np.sin(j * theta)
        cols.append(np.column_stack([cj, sj, drift * cj, drift * sj]))
    X = np.hstack(cols)
    coef = solve_gram(X, y)
    return X @ coef, X.shape[1]


@dataclass(frozen=True)
class DecompositionResult:
    imfs: tuple[ImfFit, ...]
    residual: TimeSeries
    converged: bool

    def reconstruction(self) -> TimeSeries:
        total = self.residual.values.copy()
        for imf in self.imfs:
            total += evaluate_imf(imf).values
        return self.residual.with_values(total)


def decompose(signal: TimeSeries, cfg: DecompositionConfig | None = None) -> DecompositionResult:
    """Peel components off the signal until the residual is small.

    Components are extracted greedily from the running residual; peeling
    stops at ``epsilon0``, at ``max_imfs``, when no component can be
    initialized, or when a component fails to shrink the residual
    meaningfully (non-oscillatory remainders such as trends stay in the
    residual).
    """
    cfg = cfg or DecompositionConfig()
    eps0 = cfg.epsilon0 if cfg.epsilon0 is not None else 0.01 * signal.norm()
    residual = signal.values.copy()
    imfs: list[ImfFit] = []
    fits_converged = True
    stopped_clean = False
    while len(imfs) < cfg.max_imfs:
        res_norm = float(np.linalg.norm(residual))
        if res_norm < eps0:
            stopped_clean = True
            break
        series = signal.with_values(residual)
        try:
            fit = extract_imf(series, cfg)
        except (PhaseInitError, InsufficientOscillationError) as exc:
            if not imfs:
                raise DecompositionError(
                    f"no component could be extracted: {exc}"
                ) from exc
            stopped_clean = True
            break
        if cfg.shape_order > 0:
            fit = attach_shape(residual, fit, cfg.shape_order)
        new_residual = residual - evaluate_imf(fit).values
        if float(np.linalg.norm(new_residual)) >= res_norm * (1.0 - MIN_RELATIVE_REDUCTION):
            if not imfs:
                raise DecompositionError(
                    "extraction left the residual essentially unchanged"
                )
            stopped_clean = True
            break
        fits_converged &= fit.converged
        imfs.append(fit)
        residual = new_residual
    if not imfs:
        raise DecompositionError("signal yielded no components")
    if float(np.linalg.norm(residual)) < eps0:
        stopped_clean = True
    return DecompositionResult(
        imfs=tuple(imfs),
        residual=signal.with_values(residual),
        converged=fits_converged and stopped_clean,
    )
