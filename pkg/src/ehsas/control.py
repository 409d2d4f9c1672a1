"""Nonlinear-gain PID control, ultimate-cycle tuning and closed-loop runs.

The controller output is ``k(e) * (Kp e + Ki I + Kd D)`` where
``k(e) = k0 + k1 (1 - sech(k2 e))`` is shared by all three terms.

Discrete realisation:

* ``I`` is the trapezoidal integral of the error with the error before the
  first sample taken as zero, so a constant error ``e`` held for ``n`` steps
  gives ``I = (n - 1/2) e dt``.
* ``D`` is the backward difference of the error passed through a first-order
  low-pass with time constant ``derivative_filter_tau`` (default ``5 dt``).
  The filter starts at the first error, so there is no derivative kick.
* With anti-windup enabled the integral is frozen on any step where the
  output saturates in the direction of the error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.signal

from .errors import ConfigError, DivergenceError, InputError, TuningError
from .plant import LinearTf, PlantParams, PlantRunner, PlantState
from .sysid import ArxModel
from .timeseries import TimeSeries

SECH_CUTOFF = 40.0


@dataclass(frozen=True)
class NpidConfig:
    Kp: float
    Ki: float = 0.0
    Kd: float = 0.0
    k0: float = 1.0
    k1: float = 3.0
    k2: float = 0.05
    u_min: float = -10.0
    u_max: float = 10.0
    derivative_filter_tau: float | None = None  # None means 5 * dt
    anti_windup: bool = True

    def __post_init__(self):
        for name in ("Kp", "Ki", "Kd", "k0", "k1", "k2", "u_min", "u_max"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(f"controller {name} must be a finite number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if min(self.Kp, self.Ki, self.Kd) < 0:
            raise ConfigError("PID gains must be non-negative")
        if not self.k0 > 0 or self.k1 < 0 or self.k2 < 0:
            raise ConfigError("nonlinear gain needs k0 > 0, k1 >= 0, k2 >= 0")
        if not self.u_min < self.u_max:
            raise ConfigError("controller output limits need u_min < u_max")
        tau = self.derivative_filter_tau
        if tau is not None and not (math.isfinite(tau) and tau >= 0):
            raise ConfigError("derivative filter time constant must be >= 0")

    def with_gains(self, Kp: float, Ki: float, Kd: float) -> NpidConfig:
        return replace(self, Kp=Kp, Ki=Ki, Kd=Kd)

    def filter_tau(self, dt: float) -> float:
        return 5.0 * dt if self.derivative_filter_tau is None else self.derivative_filter_tau


@dataclass(frozen=True)
class ControllerState:
    integral: float = 0.0
    previous_error: float = 0.0
    filtered_error: float = 0.0
    initialized: bool = False
    gain: float = 1.0  # k(e) used on the last step, for logging


@dataclass(frozen=True)
class ZnResult:
    Kcr: float
    Tcr: float
    Kp: float
    Ki: float
    Kd: float


def nonlinear_gain(e, k0: float = 1.0, k1: float = 3.0, k2: float = 0.05):
    """``k0 + k1 (1 - sech(k2 e))``; sech is taken as 0 beyond ``|k2 e| > 40``."""
    x = np.abs(k2 * np.asarray(e, dtype=float))
    with np.errstate(over="ignore"):
        # 2 / (e^x + e^-x) = 2 e^-x / (1 + e^-2x), no overflow for large x
        ex = np.exp(-x)
        sech = np.where(x > SECH_CUTOFF, 0.0, 2.0 * ex / (1.0 + ex * ex))
    k = k0 + k1 * (1.0 - sech)
    return float(k) if np.ndim(k) == 0 else k


def npid_step(state: ControllerState, e: float, dt: float,
              config: NpidConfig) -> tuple[float, ControllerState]:
    if not math.isfinite(e):
        raise InputError(f"controller error must be finite, got {e!r}")
    if not (math.isfinite(dt) and dt > 0):
        raise ConfigError(f"controller step must be positive, got {dt!r}")
    k = nonlinear_gain(e, config.k0, config.k1, config.k2)

    if state.initialized:
        tau = config.filter_tau(dt)
        filtered = state.filtered_error + dt / (tau + dt) * (e - state.filtered_error)
        derivative = (filtered - state.filtered_error) / dt
    else:
        filtered, derivative = e, 0.0

    integral = state.integral + 0.5 * dt * (e + state.previous_error)
    u = k * (config.Kp * e + config.Ki * integral + config.Kd * derivative)
    if config.anti_windup and ((u > config.u_max and e > 0) or (u < config.u_min and e < 0)):
        integral = state.integral
        u = k * (config.Kp * e + config.Ki * integral + config.Kd * derivative)
    u = min(max(u, config.u_min), config.u_max)
    return u, ControllerState(integral, e, filtered, True, k)


def ziegler_nichols(Kcr: float, Tcr: float) -> tuple[float, float, float]:
    """Classic ultimate-cycle PID rule."""
    if not (Kcr > 0 and Tcr > 0):
        raise ConfigError("critical gain and period must be positive")
    kp = 0.6 * Kcr
    return kp, kp / (0.5 * Tcr), kp * 0.125 * Tcr


# --- simulation targets ----------------------------------------------------


class ArxRunner:
    """Free-running ARX model started from rest; ``y`` is the deviation
    from the initial output."""

    def __init__(self, model: ArxModel, dt: float):
        if not math.isclose(dt, model.Ts, rel_tol=1e-9):
            raise ConfigError(f"loop period {dt:g} s differs from model period {model.Ts:g} s")
        if model.nk < 1:
            raise ConfigError("closed-loop simulation needs an ARX model with nk >= 1")
        self.a = np.array(model.a)
        self.b = np.array(model.b)
        self.nk = model.nk
        self.y_hist = np.zeros(model.na)  # newest first
        self.u_hist = np.zeros(model.nk + model.nb - 1)  # newest first
        self.y = 0.0
        self.index = 0

    def advance(self, u: float):
        if self.u_hist.size:
            self.u_hist = np.concatenate([[u], self.u_hist[:-1]])
        if self.y_hist.size:
            self.y_hist = np.concatenate([[self.y], self.y_hist[:-1]])
        y = float(np.dot(self.b, self.u_hist[self.nk - 1:]) - np.dot(self.a, self.y_hist))
        self.index += 1
        if not math.isfinite(y):
            raise DivergenceError(f"ARX model diverged at sample {self.index}", self.index)
        self.y = y


class LinearTfRunner:
    """Zero-order-hold discretisation of a strictly proper transfer function."""

    def __init__(self, tf: LinearTf, dt: float):
        a, b, c, d = scipy.signal.tf2ss(tf.num, tf.den)
        if np.any(d != 0):
            raise ConfigError("closed-loop simulation needs a strictly proper transfer function")
        ad, bd, cd, _, _ = scipy.signal.cont2discrete((a, b, c, d), dt, method="zoh")
        self.ad, self.bd, self.c = ad, bd[:, 0], c[0]
        self.x = np.zeros(ad.shape[0])
        self.y = 0.0
        self.index = 0

    def advance(self, u: float):
        self.x = self.ad @ self.x + self.bd * u
        self.index += 1
        y = float(self.c @ self.x)
        if not math.isfinite(y):
            raise DivergenceError(f"linear model diverged at sample {self.index}", self.index)
        self.y = y


def make_runner(target, dt: float, initial: PlantState | None = None):
    if isinstance(target, PlantParams):
        return PlantRunner(target, dt, initial)
    if isinstance(target, ArxModel):
        return ArxRunner(target, dt)
    if isinstance(target, LinearTf):
        return LinearTfRunner(target, dt)
    raise ConfigError(f"unsupported closed-loop target {type(target).__name__}")


# --- closed loop -----------------------------------------------------------


@dataclass(frozen=True)
class ClosedLoopResult:
    reference: TimeSeries
    position: TimeSeries
    command: TimeSeries
    error: TimeSeries
    gain: TimeSeries


def simulate_closed_loop(target, controller: NpidConfig, reference: TimeSeries,
                         dt: float | None = None,
                         initial: PlantState | None = None) -> ClosedLoopResult:
    """Unity-feedback loop sampled at the reference period.

    Sample ``k`` holds the output measured before command ``u[k]`` is applied
    for one period. Outputs are displacements from the initial position.
    """
    if dt is not None and not math.isclose(dt, reference.dt, rel_tol=1e-12):
        raise ConfigError(f"loop period {dt:g} s differs from reference period {reference.dt:g} s")
    step = reference.dt
    runner = make_runner(target, step, initial)
    r = reference.samples
    n = r.size
    y, u, e, k = (np.empty(n) for _ in range(4))
    state = ControllerState()
    for i in range(n):
        y[i] = runner.y
        e[i] = r[i] - y[i]
        u[i], state = npid_step(state, e[i], step, controller)
        k[i] = state.gain
        if i + 1 < n:
            runner.advance(u[i])
    series = lambda x: TimeSeries(reference.t0, step, x)  # noqa: E731
    return ClosedLoopResult(reference, series(y), series(u), series(e), series(k))


def discrete_tf(target, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Equal-length ``(num, den)`` in powers of ``z^-1`` for a linear target."""
    if isinstance(target, ArxModel):
        ArxRunner(target, dt)  # validates period and delay
        num, den = target.filter_coeffs()
    elif isinstance(target, LinearTf):
        LinearTfRunner(target, dt)
        num, den, _ = scipy.signal.cont2discrete((target.num, target.den), dt, method="zoh")
        num = np.ravel(num)
    else:
        raise ConfigError(f"{type(target).__name__} has no discrete transfer function")
    size = max(num.size, den.size)
    num = np.pad(num, (0, size - num.size))
    den = np.pad(den, (0, size - den.size))
    return num / den[0], den / den[0]


def proportional_step_response(target, gain: float, dt: float, n: int,
                               amplitude: float = 1.0) -> np.ndarray:
    """Output of the unsaturated P-only loop for a step reference."""
    if isinstance(target, (ArxModel, LinearTf)):
        # closed loop K N / (D + K N); N has no direct feedthrough
        num, den = discrete_tf(target, dt)
        with np.errstate(all="ignore"):
            y = scipy.signal.lfilter(gain * num, den + gain * num, np.full(n, amplitude))
        bad = np.flatnonzero(~np.isfinite(y))
        if bad.size:
            raise DivergenceError(f"P loop diverged at sample {int(bad[0])}", int(bad[0]))
        return y
    runner = make_runner(target, dt)
    y = np.empty(n)
    for i in range(n):
        y[i] = runner.y
        if i + 1 < n:
            runner.advance(gain * (amplitude - y[i]))
    return y


def _extrema(y: np.ndarray) -> np.ndarray:
    """Indices of strict local maxima and minima, alternating."""
    d = np.diff(y)
    s = np.sign(d)
    # carry the last nonzero slope through flat stretches
    nz = np.flatnonzero(s)
    if nz.size < 2:
        return np.array([], dtype=int)
    s = s[nz]
    turns = np.flatnonzero(s[1:] != s[:-1])
    return nz[turns] + 1


@dataclass(frozen=True)
class _Oscillation:
    verdict: str  # "decaying", "sustained", "growing" or "none"
    period: float
    ratio: float


def _classify(y: np.ndarray, dt: float, cycles: int, tolerance: float) -> _Oscillation:
    scale = max(float(np.max(np.abs(y))), 1e-300)
    idx = _extrema(y)
    if idx.size < 2 * cycles + 1:
        return _Oscillation("none", math.nan, math.nan)
    idx = idx[-(2 * cycles + 1):]
    swings = np.abs(np.diff(y[idx]))
    if swings[-1] <= 1e-9 * scale:
        return _Oscillation("decaying", math.nan, 0.0)
    ratio = float(swings[-1] / swings[0])
    maxima = idx[y[idx] > y[idx - 1]]  # extrema indices are >= 1
    period = float(np.mean(np.diff(maxima)) * dt) if maxima.size >= 2 else math.nan
    if ratio < 1.0 - tolerance:
        verdict = "decaying"
    elif ratio > 1.0 + tolerance:
        verdict = "growing"
    else:
        verdict = "sustained"
    return _Oscillation(verdict, period, ratio)


def _probe(target, gain: float, dt: float, n0: int, n_max: int,
           cycles: int, tolerance: float) -> _Oscillation:
    n = n0
    while True:
        try:
            y = proportional_step_response(target, gain, dt, n)
        except DivergenceError:
            return _Oscillation("growing", math.nan, math.inf)
        if np.max(np.abs(y)) > 1e150:
            return _Oscillation("growing", math.nan, math.inf)
        result = _classify(y, dt, cycles, tolerance)
        if result.verdict != "none" or n >= n_max:
            return result
        n *= 2


def find_critical_gain(target, dt: float, gain_min: float, gain_max: float,
                       cycles: int = 5, tolerance: float = 0.05,
                       initial_samples: int = 1000, max_samples: int = 2**18,
                       max_iterations: int = 80) -> tuple[float, float]:
    """Bisect on the P gain between a decaying and a growing oscillation.

    An oscillation is sustained when the peak-to-trough swing over the last
    ``cycles`` cycles changes by at most ``tolerance``; the critical period is
    the mean spacing of the maxima in that window. The record length doubles
    until enough extrema are seen.
    """
    if not (0 < gain_min < gain_max) or not math.isfinite(gain_max):
        raise ConfigError("critical-gain search needs 0 < gain_min < gain_max")
    if not (dt > 0):
        raise ConfigError("critical-gain search needs dt > 0")

    def probe(k):
        return _probe(target, k, dt, initial_samples, max_samples, cycles, tolerance)

    advice = "no oscillatory regime within the gain bounds; supply PID gains manually"
    high = probe(gain_max)
    if high.verdict == "sustained":
        return gain_max, high.period
    if high.verdict != "growing":
        raise TuningError(advice)
    low = probe(gain_min)
    if low.verdict == "sustained":
        return gain_min, low.period
    if low.verdict == "growing":
        raise TuningError(f"loop already unstable at the lower gain bound {gain_min:g}")

    lo, hi = math.log(gain_min), math.log(gain_max)
    best = None
    for _ in range(max_iterations):
        mid = 0.5 * (lo + hi)
        result = probe(math.exp(mid))
        if result.verdict == "sustained":
            return math.exp(mid), result.period
        if result.verdict == "growing":
            hi = mid
        else:
            lo = mid
            if math.isfinite(result.period):
                best = result
        if hi - lo < 1e-12:
            break
    if best is None or not math.isfinite(best.period):
        raise TuningError(advice)
    return math.exp(0.5 * (lo + hi)), best.period


def auto_tune(target, dt: float, gain_min: float, gain_max: float, **kwargs) -> ZnResult:
    kcr, tcr = find_critical_gain(target, dt, gain_min, gain_max, **kwargs)
    kp, ki, kd = ziegler_nichols(kcr, tcr)
    return ZnResult(kcr, tcr, kp, ki, kd)
