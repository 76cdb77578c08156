"""Second-order oscillator lab: benchmark scenarios, integration, noise,
and the exact component<->ODE coefficient maps used as test oracles.

All scenarios model  x'' + p(x,t) x' + q(x,t) = f(t)  where q is the full
restoring *term* (not the coefficient of x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateFrequencyError, IntegrationBlowupError
from .series import Imf, TimeSeries, _derivative

# Frequencies below this are treated as degenerate when dividing by theta'.
TOL_FREQ = 1e-6


@dataclass(frozen=True)
class OdeScenario:
    name: str
    p_fn: Callable[[float, float], float]
    q_fn: Callable[[float, float], float]
    forcing: Callable[[float], float]
    x0: float
    v0: float
    t_span: tuple[float, float]


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white noise: amplitude * N(0, 1) from a seeded PCG64 stream."""

    amplitude: float
    seed: int

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("noise amplitude must be nonnegative")


def integrate(scenario: OdeScenario, dt: float) -> tuple[TimeSeries, TimeSeries]:
    """Fixed-step classical RK4 solution of (x, x') over the scenario span."""
    t_start, t_final = scenario.t_span
    span = t_final - t_start
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > span / 100:
        raise ValueError("dt must not exceed span/100")
    n_steps = int(round(span / dt))
    p_fn, q_fn, forcing = scenario.p_fn, scenario.q_fn, scenario.forcing

    def acc(xi, vi, ti):
        return forcing(ti) - p_fn(xi, ti) * vi - q_fn(xi, ti)

    xs = np.empty(n_steps + 1)
    vs = np.empty(n_steps + 1)
    x, v = float(scenario.x0), float(scenario.v0)
    xs[0], vs[0] = x, v
    half = 0.5 * dt
    sixth = dt / 6.0
    for i in range(n_steps):
        t = t_start + i * dt
        k1x = v
        k1v = acc(x, v, t)
        k2x = v + half * k1v
        k2v = acc(x + half * k1x, k2x, t + half)
        k3x = v + half * k2v
        k3v = acc(x + half * k2x, k3x, t + half)
        k4x = v + dt * k3v
        k4v = acc(x + dt * k3x, k4x, t + dt)
        x += sixth * (k1x + 2.0 * (k2x + k3x) + k4x)
        v += sixth * (k1v + 2.0 * (k2v + k3v) + k4v)
        if not (math.isfinite(x) and math.isfinite(v)):
            raise IntegrationBlowupError(t + dt)
        xs[i + 1] = x
        vs[i + 1] = v
    return TimeSeries(t_start, dt, xs), TimeSeries(t_start, dt, vs)


def smooth_gate(t: float) -> float:
    """Transition weight a(t) = (1 - (t-100)/sqrt((t-100)^2 + 400)) / 2."""
    u = t - 100.0
    return 0.5 * (1.0 - u / math.sqrt(u * u + 400.0))


def step_gate(t: float) -> float:
    """Sharp transition weight (1 - sgn(t-100)) / 2."""
    if t < 100.0:
        return 1.0
    if t > 100.0:
        return 0.0
    return 0.5


SCENARIO_NAMES = ("van_der_pol", "duffing", "smooth_transition", "jump_transition")


def scenario_catalog(name: str, x0: float | None = None, v0: float | None = None,
                     T: float | None = None) -> OdeScenario:
    """Benchmark oscillators with their published coefficient functions.

    Defaults: x(0)=1, x'(0)=0; span 100 s for the autonomous pair and 200 s
    for the two transition scenarios.
    """
    zero = lambda t: 0.0
    if name == "van_der_pol":
        scen = OdeScenario(
            name,
            p_fn=lambda x, t: x * x - 1.0,
            q_fn=lambda x, t: x,
            forcing=zero, x0=1.0, v0=0.0, t_span=(0.0, 100.0),
        )
    elif name == "duffing":
        scen = OdeScenario(
            name,
            p_fn=lambda x, t: 0.0,
            q_fn=lambda x, t: x + x**3,
            forcing=zero, x0=1.0, v0=0.0, t_span=(0.0, 100.0),
        )
    elif name == "smooth_transition":
        # x'' + a(t)(x^2-1)x' + (1-a(t))x^3 + x = 0
        scen = OdeScenario(
            name,
            p_fn=lambda x, t: smooth_gate(t) * (x * x - 1.0),
            q_fn=lambda x, t: (1.0 - smooth_gate(t)) * x**3 + x,
            forcing=zero, x0=1.0, v0=0.0, t_span=(0.0, 200.0),
        )
    elif name == "jump_transition":
        # Sharp version of smooth_transition: the gate becomes a step, so the
        # damping switches off and the cubic restoring switches on at t=100.
        scen = OdeScenario(
            name,
            p_fn=lambda x, t: step_gate(t) * (x * x - 1.0),
            q_fn=lambda x, t: (1.0 - step_gate(t)) * x**3 + x,
            forcing=zero, x0=1.0, v0=0.0, t_span=(0.0, 200.0),
        )
    else:
        raise ValueError(f"unknown scenario {name!r}")
    if x0 is not None or v0 is not None or T is not None:
        scen = OdeScenario(
            scen.name, scen.p_fn, scen.q_fn, scen.forcing,
            scen.x0 if x0 is None else float(x0),
            scen.v0 if v0 is None else float(v0),
            scen.t_span if T is None else (0.0, float(T)),
        )
    return scen


def add_noise(x: TimeSeries, spec: NoiseSpec) -> TimeSeries:
    """x plus amplitude * standard-normal deviates.

    The generator is numpy's PCG64 seeded with ``spec.seed`` and sampled with
    ``standard_normal``; fixing the algorithm keeps runs reproducible across
    platforms.
    """
    if spec.amplitude == 0:
        return x
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    return x.with_values(x.values + spec.amplitude * rng.standard_normal(x.n))


@dataclass(frozen=True)
class CompositeSignal:
    """Benchmark mixture plus its clean parts for ground-truth comparisons."""

    total: TimeSeries
    oscillator: TimeSeries
    cosine: TimeSeries
    trend: TimeSeries
    noise: TimeSeries


def composite_signal(seed: int, noise_amplitude: float = 0.1,
                     dt: float = 1e-3) -> CompositeSignal:
    """Relaxation oscillation + cos(16*pi*t/200) + t/100 + noise on [0, 200]."""
    scen = scenario_catalog("van_der_pol", x0=2.0, v0=0.0, T=200.0)
    osc, _ = integrate(scen, dt)
    t = osc.t
    cosine = TimeSeries(0.0, dt, np.cos(16.0 * np.pi * t / 200.0))
    trend = TimeSeries(0.0, dt, t / 100.0)
    clean = osc.values + cosine.values + trend.values
    if noise_amplitude > 0:
        rng = np.random.Generator(np.random.PCG64(seed))
        noise_vals = noise_amplitude * rng.standard_normal(t.size)
    else:
        noise_vals = np.zeros(t.size)
    noise = TimeSeries(0.0, dt, noise_vals)
    total = TimeSeries(0.0, dt, clean + noise_vals)
    return CompositeSignal(total, osc, cosine, trend, noise)


def imf_to_ode_coefficients(imf: Imf) -> tuple[TimeSeries, TimeSeries]:
    """Coefficient series (p, q) such that x = a cos(theta) solves
    x'' + p x' + q x = 0:

        p = -theta''/theta' - 2 a'/a
        q = theta'^2 + a' theta''/(a theta') + 2 (a'/a)^2 - a''/a
    """
    a = imf.amplitude.values
    dt = imf.amplitude.dt
    da = _derivative(a, dt, 1)
    dda = _derivative(a, dt, 2)
    th1 = _derivative(imf.phase.values, dt, 1)
    th2 = _derivative(imf.phase.values, dt, 2)
    if np.any(th1 <= TOL_FREQ):
        raise DegenerateFrequencyError(
            f"theta' drops to {th1.min():.3g}, below {TOL_FREQ}"
        )
    ra = da / a
    p = -th2 / th1 - 2.0 * ra
    q = th1**2 + ra * th2 / th1 + 2.0 * ra**2 - dda / a
    return imf.amplitude.with_values(p), imf.amplitude.with_values(q)


def duffing_theta_dot(theta, amplitude):
    """Closed-form intra-wave frequency of the undamped cubic oscillator
    x = A cos(theta):  theta' = sqrt(A^2/2 (1 + cos^2 theta) + 1)."""
    if np.any(np.asarray(amplitude) < 0):
        raise ValueError("amplitude must be nonnegative")
    c = np.cos(theta)
    return np.sqrt(0.5 * amplitude**2 * (1.0 + c * c) + 1.0)


def duffing_amplitude(x0: float, v0: float) -> float:
    """Peak amplitude of x'' + x + x^3 = 0 from the conserved energy."""
    energy = 0.5 * v0 * v0 + 0.5 * x0 * x0 + 0.25 * x0**4
    return math.sqrt(-1.0 + math.sqrt(1.0 + 4.0 * energy))


def duffing_phase(x: TimeSeries, v: TimeSeries, amplitude: float) -> TimeSeries:
    """Continuous non-decreasing phase of a cubic-oscillator trajectory.

    Uses the two arccos branches selected by the sign of x', unwrapped into a
    monotone phase; x(t) = A cos(theta(t)) holds exactly on the result.
    """
    ratio = np.clip(x.values / amplitude, -1.0, 1.0)
    branch = np.where(v.values <= 0, np.arccos(ratio), 2.0 * np.pi - np.arccos(ratio))
    theta = np.unwrap(branch)
    return x.with_values(theta)
