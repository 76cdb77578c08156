"""Sampled-signal types and basic numerics.

Everything downstream works with uniformly sampled real series.  The
quadrature is trapezoidal and derivatives use second-order central
differences with second-order one-sided stencils at the boundaries, so all
grid operations share the same O(dt^2) accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CsvFormatError, GridMismatchError

# Tolerance for validating monotone phases sampled in floating point.
TOL_MONO = 1e-10

GRID_RTOL = 1e-9


def _as_readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError("samples must form a 1-d array")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled real signal starting at ``t0`` with spacing ``dt``."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_readonly(self.values))
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.values.size < 4:
            raise ValueError("a series needs at least 4 samples")

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.n - 1)

    @property
    def duration(self) -> float:
        return self.dt * (self.n - 1)

    def with_values(self, values) -> "TimeSeries":
        return TimeSeries(self.t0, self.dt, values)

    def same_grid(self, other: "TimeSeries") -> bool:
        scale = max(abs(self.dt), abs(other.dt), 1e-300)
        return (
            self.n == other.n
            and abs(self.dt - other.dt) <= GRID_RTOL * scale
            and abs(self.t0 - other.t0) <= GRID_RTOL * max(scale, abs(self.t0), abs(other.t0))
        )

    def index_of(self, time: float, clip: bool = True) -> int:
        i = int(round((time - self.t0) / self.dt))
        if clip:
            i = min(max(i, 0), self.n - 1)
        return i

    def slice_time(self, lo: float, hi: float) -> "TimeSeries":
        """Sub-series covering [lo, hi], snapped inward to the grid."""
        i0 = max(0, int(np.ceil((lo - self.t0) / self.dt - 1e-9)))
        i1 = min(self.n - 1, int(np.floor((hi - self.t0) / self.dt + 1e-9)))
        if i1 - i0 + 1 < 4:
            raise ValueError("slice keeps fewer than 4 samples")
        return TimeSeries(self.t0 + i0 * self.dt, self.dt, self.values[i0 : i1 + 1])

    def norm(self) -> float:
        """Plain l2 norm of the sample vector."""
        return float(np.linalg.norm(self.values))


@dataclass(frozen=True)
class Imf:
    """Oscillatory component a(t)*s(theta(t)).

    Without shape coefficients the waveform s is the cosine.  With shape
    coefficients c_j (j = -N..N, stored in order -N..N) the waveform is the
    2*pi-periodic sum of complex exponentials, constrained hermitian so the
    evaluation is real.
    """

    amplitude: TimeSeries
    phase: TimeSeries
    shape: np.ndarray | None = None

    def __post_init__(self):
        if not self.amplitude.same_grid(self.phase):
            raise GridMismatchError("amplitude and phase grids differ")
        if np.any(self.amplitude.values <= 0):
            raise ValueError("amplitude samples must be strictly positive")
        dphi = np.diff(self.phase.values)
        if np.any(dphi < -TOL_MONO):
            raise ValueError("phase samples must be non-decreasing")
        if self.shape is not None:
            shape = np.asarray(self.shape, dtype=complex)
            if shape.ndim != 1 or shape.size % 2 != 1:
                raise ValueError("shape must hold coefficients for j=-N..N")
            ns = shape.size // 2
            sym = shape[::-1].conj()
            if not np.allclose(shape, sym, atol=1e-10):
                raise ValueError("shape coefficients must satisfy c_{-j} = conj(c_j)")
            if abs(shape[ns].imag) > 1e-10:
                raise ValueError("c_0 must be real")
            object.__setattr__(self, "shape", shape)

    @property
    def shape_order(self) -> int:
        return 0 if self.shape is None else self.shape.size // 2


def inner_product(f: TimeSeries, g: TimeSeries) -> float:
    """Trapezoidal approximation of the integral of f*g over the shared grid."""
    if not f.same_grid(g):
        raise GridMismatchError("inner_product requires identical grids")
    return float(np.trapezoid(f.values * g.values, dx=f.dt))


def _derivative(values: np.ndarray, dt: float, order: int) -> np.ndarray:
    n = values.size
    if n < 4:
        raise ValueError("differentiation needs at least 4 samples")
    out = np.empty(n)
    if order == 1:
        out[1:-1] = (values[2:] - values[:-2]) / (2 * dt)
        out[0] = (-3 * values[0] + 4 * values[1] - values[2]) / (2 * dt)
        out[-1] = (3 * values[-1] - 4 * values[-2] + values[-3]) / (2 * dt)
    elif order == 2:
        out[1:-1] = (values[2:] - 2 * values[1:-1] + values[:-2]) / dt**2
        out[0] = (2 * values[0] - 5 * values[1] + 4 * values[2] - values[3]) / dt**2
        out[-1] = (2 * values[-1] - 5 * values[-2] + 4 * values[-3] - values[-4]) / dt**2
    else:
        raise ValueError("order must be 1 or 2")
    return out


def differentiate(f: TimeSeries, order: int = 1) -> TimeSeries:
    """Finite-difference derivative on the same grid.

    Central differences at interior points, one-sided second-order stencils
    at the two boundary points.
    """
    return f.with_values(_derivative(f.values, f.dt, order))


def cumulative_integral(values: np.ndarray, dt: float) -> np.ndarray:
    """Cumulative trapezoid of a sample vector, starting at 0."""
    out = np.empty(values.size)
    out[0] = 0.0
    np.cumsum((values[1:] + values[:-1]) * (0.5 * dt), out=out[1:])
    return out


def shape_waveform(shape: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Evaluate sum_j c_j exp(i j theta) for hermitian coefficients; real."""
    shape = np.asarray(shape, dtype=complex)
    ns = shape.size // 2
    out = np.full(theta.shape, shape[ns].real)
    for j in range(1, ns + 1):
        cj = shape[ns + j]
        out += 2.0 * (cj.real * np.cos(j * theta) - cj.imag * np.sin(j * theta))
    return out


def evaluate_imf(imf: Imf) -> TimeSeries:
    """Sample values of the component a*cos(theta), or a*s(theta) with shape."""
    theta = imf.phase.values
    if imf.shape is None:
        wave = np.cos(theta)
    else:
        wave = shape_waveform(imf.shape, theta)
    return imf.amplitude.with_values(imf.amplitude.values * wave)


def instantaneous_frequency(imf: Imf) -> TimeSeries:
    """Phase derivative; tiny round-off negatives are clipped to zero."""
    omega = _derivative(imf.phase.values, imf.phase.dt, 1)
    return imf.phase.with_values(np.maximum(omega, 0.0))


# CSV serialization: header `t,x`, one row per sample, 17 significant digits
# so float64 values round-trip exactly.

def write_csv(ts: TimeSeries, path) -> None:
    data = np.column_stack([ts.t, ts.values])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header="t,x", comments="")


def read_csv(path) -> TimeSeries:
    times = []
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.strip():
            raise CsvFormatError(1, "empty file")
        if header.strip().lower().replace(" ", "") != "t,x":
            raise CsvFormatError(1, f"expected header 't,x', got {header.strip()!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise CsvFormatError(lineno, f"expected 2 columns, got {len(parts)}")
            try:
                times.append(float(parts[0]))
                values.append(float(parts[1]))
            except ValueError:
                raise CsvFormatError(lineno, f"non-numeric row {line!r}") from None
    if len(times) < 4:
        raise CsvFormatError(len(times) + 1, "need at least 4 samples")
    t = np.asarray(times)
    diffs = np.diff(t)
    dt = (t[-1] - t[0]) / (t.size - 1)
    if dt <= 0 or np.any(np.abs(diffs - dt) > 1e-6 * max(dt, 1e-12)):
        raise CsvFormatError(2, "time column is not uniformly spaced")
    return TimeSeries(t[0], dt, values)
