"""Localized nonlinearity analysis along a long signal.

Each analysis point gets a phase-defined window (a raised-cosine cutoff in
phase coordinates), a local component fit, and a sparse ODE-coefficient
solve.  The transition-friendly variant fits left-, center- and right-sided
windows and keeps the one whose component fits best, so sided windows take
over near sharp coefficient changes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .decompose import (
    DecompositionConfig,
    DecompositionError,
    ImfFit,
    attach_shape,
    extract_imf,
)
from .errors import (
    InsufficientOscillationError,
    NoOscillationError,
    PhaseInitError,
    SkippedWindowError,
    TruncatedWindowWarning,
    WindowTooShortError,
)
from .series import TimeSeries, evaluate_imf
from .sysid import (
    PolynomialPair,
    SparseSolveConfig,
    assemble_weak_system,
    build_test_functions,
    degree_capped_solve,
    degrees_of_nonlinearity,
    entry_noise_scale,
    estimate_sample_noise,
    local_period_from_phase,
    refine_support,
    solve_l1_weak,
)

WINDOW_KINDS = ("center", "left", "right")

# Minimum fraction of a window's phase support that must lie inside the
# signal domain for the window to be analyzed at all.
MIN_PHASE_COVERAGE = 0.8


@dataclass(frozen=True)
class CutoffSpec:
    """Width of the phase cutoff: the centered window spans mu periods."""

    mu: float = 3.0

    def __post_init__(self):
        if self.mu < 1:
            raise ValueError("mu must be at least 1")


@dataclass(frozen=True)
class AnalysisConfig:
    decomposition: DecompositionConfig = field(default_factory=DecompositionConfig)
    sparse: SparseSolveConfig = field(default_factory=SparseSolveConfig)
    cutoff: CutoffSpec = field(default_factory=CutoffSpec)
    refine: bool = True
    shape_order: int = 8
    # Windows are un-tapered before the weak solve; samples where the cutoff
    # falls below this floor are dropped instead of amplified.
    chi_floor: float = 0.15


@dataclass(frozen=True)
class AnalysisPoint:
    t: float
    pair: PolynomialPair
    i1: int
    i2: int
    residual: float
    window_kind: str


@dataclass(frozen=True)
class SkippedPoint:
    t: float
    reason: str


@dataclass(frozen=True)
class AnalysisResult:
    points: tuple[AnalysisPoint, ...]
    skipped: tuple[SkippedPoint, ...]
    global_fit: ImfFit

    def to_json_dict(self) -> dict:
        return {
            "points": [
                {
                    "t": pt.t,
                    "p": [float(v) for v in pt.pair.p],
                    "q": [float(v) for v in pt.pair.q],
                    "I1": None if pt.i1 < 0 else pt.i1,
                    "I2": None if pt.i2 < 0 else pt.i2,
                    "residual": pt.residual,
                    "window": pt.window_kind,
                }
                for pt in self.points
            ],
            "skipped": [{"t": sk.t, "reason": sk.reason} for sk in self.skipped],
        }


def _phase_offsets(kind: str, mu: float) -> tuple[float, float]:
    if kind == "center":
        return -mu * np.pi, mu * np.pi
    if kind == "left":
        return -2.0 * mu * np.pi, 0.0
    if kind == "right":
        return 0.0, 2.0 * mu * np.pi
    raise ValueError(f"unknown window kind {kind!r}")


def cutoff_weights(u, kind: str, mu: float):
    """Raised-cosine cutoff evaluated at phase offsets u from the center."""
    u = np.asarray(u, dtype=float)
    lo, hi = _phase_offsets(kind, mu)
    inside = (u > lo) & (u < hi)
    if kind == "center":
        vals = 0.5 * (1.0 + np.cos(u / mu))
    elif kind == "left":
        vals = 0.5 * (1.0 + np.cos(u / mu + np.pi))
    else:
        vals = 0.5 * (1.0 + np.cos(u / mu - np.pi))
    return np.where(inside, vals, 0.0)


def _localize(f: TimeSeries, theta: TimeSeries, t_j: float, kind: str,
              spec: CutoffSpec):
    """Windowed signal, cutoff weights and phase slice around t_j."""
    if not f.same_grid(theta):
        raise ValueError("phase must be sampled on the signal grid")
    th = theta.values
    theta_c = float(np.interp(t_j, f.t, th))
    off_lo, off_hi = _phase_offsets(kind, spec.mu)
    lo, hi = theta_c + off_lo, theta_c + off_hi
    width = hi - lo
    overlap = min(hi, th[-1]) - max(lo, th[0])
    coverage = overlap / width
    if coverage < MIN_PHASE_COVERAGE:
        raise SkippedWindowError(
            f"{kind} window at t={t_j:.6g} has only {coverage:.0%} "
            f"of its phase support inside the signal"
        )
    if coverage < 1.0 - 1e-9:
        warnings.warn(
            f"{kind} window at t={t_j:.6g} truncated to {coverage:.0%} "
            f"phase coverage",
            TruncatedWindowWarning,
            stacklevel=3,
        )
    i0 = int(np.searchsorted(th, lo, side="left"))
    i1 = int(np.searchsorted(th, hi, side="right")) - 1
    i0 = max(i0, 0)
    i1 = min(i1, f.n - 1)
    if i1 - i0 + 1 < 4:
        raise SkippedWindowError(f"window at t={t_j:.6g} keeps too few samples")
    u = th[i0 : i1 + 1] - theta_c
    chi = cutoff_weights(u, kind, spec.mu)
    win = TimeSeries(f.t0 + i0 * f.dt, f.dt, f.values[i0 : i1 + 1] * chi)
    return win, chi, i0


def localize(f: TimeSeries, theta: TimeSeries, t_j: float, kind: str = "center",
             spec: CutoffSpec | None = None) -> TimeSeries:
    """Signal multiplied by the phase cutoff centered at t_j."""
    win, _, _ = _localize(f, theta, t_j, kind, spec or CutoffSpec())
    return win


def _window_fit(f, theta, t_j, kind, cfg: AnalysisConfig):
    """Localize and fit one component; SkippedWindowError when not viable."""
    win, chi, i0 = _localize(f, theta, t_j, kind, cfg.cutoff)
    try:
        fit = extract_imf(win, cfg.decomposition)
    except (PhaseInitError, InsufficientOscillationError) as exc:
        raise SkippedWindowError(
            f"{kind} window at t={t_j:.6g}: extraction failed ({exc})"
        ) from exc
    if cfg.shape_order > 0:
        fit = attach_shape(win.values, fit, cfg.shape_order, require_span=False)
    return win, chi, i0, fit


def _sysid_on_window(f, win, chi, i0, fit, t_j, kind, cfg: AnalysisConfig) -> AnalysisPoint:
    """Sparse coefficient solve on the window core.

    The weak system is assembled from the raw signal samples on the part of
    the window where the cutoff is substantial (the taper exists to localize
    the component fit, and multiplying it into the data would inject
    spurious damping terms); the component fit supplies the phase, the local
    period and the fit residual used for window selection.
    """
    keep = np.flatnonzero(chi >= cfg.chi_floor)
    if keep.size < 4:
        raise SkippedWindowError(f"window at t={t_j:.6g} has no usable core")
    k0, k1 = int(keep[0]), int(keep[-1])
    sl = slice(k0, k1 + 1)
    x_core = TimeSeries(
        win.t0 + k0 * win.dt, win.dt, f.values[i0 + k0 : i0 + k1 + 1]
    )
    phase_slice = TimeSeries(x_core.t0, win.dt, fit.phase.values[sl])
    try:
        period = local_period_from_phase(phase_slice)
        tfs = build_test_functions(
            x_core.duration, period, cfg.sparse.order, t_start=x_core.t0
        )
    except (NoOscillationError, WindowTooShortError) as exc:
        raise SkippedWindowError(f"window at t={t_j:.6g}: {exc}") from exc
    ws = assemble_weak_system(x_core, tfs, cfg.sparse.order)
    pair = solve_l1_weak(ws, cfg.sparse)
    if cfg.refine:
        sigma_b = entry_noise_scale(tfs, x_core.dt, estimate_sample_noise(x_core))
        pair = degree_capped_solve(ws, cfg.sparse, sigma_b, seed_pair=pair)
        pair = refine_support(ws, pair, cfg.sparse)
    i1, i2 = degrees_of_nonlinearity(pair, cfg.sparse.nu0)
    return AnalysisPoint(
        t=t_j, pair=pair, i1=i1, i2=i2,
        residual=fit.residual_norm, window_kind=kind,
    )


def analyze_point(f: TimeSeries, theta: TimeSeries, t_j: float,
                  cfg: AnalysisConfig | None = None) -> AnalysisPoint:
    """Centered-window analysis of a single location."""
    cfg = cfg or AnalysisConfig()
    win, chi, i0, fit = _window_fit(f, theta, t_j, "center", cfg)
    return _sysid_on_window(f, win, chi, i0, fit, t_j, "center", cfg)


def eno_point(f: TimeSeries, theta: TimeSeries, t_j: float,
              cfg: AnalysisConfig | None = None) -> AnalysisPoint:
    """Best of the left/center/right windows by component-fit residual.

    The center window is preferred on ties; near the domain edges whatever
    sided window remains viable is used.
    """
    cfg = cfg or AnalysisConfig()
    best = None
    reasons = []
    for kind in WINDOW_KINDS:
        try:
            win, chi, i0, fit = _window_fit(f, theta, t_j, kind, cfg)
        except SkippedWindowError as exc:
            reasons.append(str(exc))
            continue
        if best is None or fit.residual_norm < best[3].residual_norm:
            best = (win, chi, i0, fit, kind)
    if best is None:
        raise SkippedWindowError("; ".join(reasons) or f"no viable window at t={t_j:.6g}")
    win, chi, i0, fit, kind = best
    return _sysid_on_window(f, win, chi, i0, fit, t_j, kind, cfg)


def _global_phase(f: TimeSeries, cfg: AnalysisConfig) -> ImfFit:
    try:
        return extract_imf(f, cfg.decomposition)
    except (PhaseInitError, InsufficientOscillationError) as exc:
        raise DecompositionError(f"global phase extraction failed: {exc}") from exc


def _point_locations(f: TimeSeries, theta: np.ndarray, K: int, mu: float) -> np.ndarray:
    """K locations uniform in phase over the interior where windows fit."""
    margin = 0.6 * mu * np.pi  # center-window coverage >= MIN_PHASE_COVERAGE
    lo = theta[0] + margin
    hi = theta[-1] - margin
    if hi <= lo:
        raise DecompositionError("signal too short for even one analysis window")
    targets = lo + (np.arange(K) + 0.5) * (hi - lo) / K
    return np.interp(targets, theta, f.t)


def analyze(f: TimeSeries, K: int, cfg: AnalysisConfig | None = None,
            eno: bool = False) -> AnalysisResult:
    """Per-point nonlinearity analysis at K phase-uniform locations.

    A single global component fit supplies the phase used to place points
    and cut windows; each point is then analyzed independently.  Windows
    that cannot be analyzed are reported in ``skipped`` with a reason.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    cfg = cfg or AnalysisConfig()
    global_fit = _global_phase(f, cfg)
    locations = _point_locations(f, global_fit.phase.values, K, cfg.cutoff.mu)
    point_fn = eno_point if eno else analyze_point
    points = []
    skipped = []
    for t_j in locations:
        try:
            points.append(point_fn(f, global_fit.phase, float(t_j), cfg))
        except SkippedWindowError as exc:
            skipped.append(SkippedPoint(float(t_j), str(exc)))
    return AnalysisResult(tuple(points), tuple(skipped), global_fit)


def eno_analyze(f: TimeSeries, K: int, cfg: AnalysisConfig | None = None) -> AnalysisResult:
    """analyze() with the three-window selection at every point."""
    return analyze(f, K, cfg, eno=True)
