"""Model-quality and step-response metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, MetricUndefinedError
from .timeseries import TimeSeries, values_of


@dataclass(frozen=True)
class FitReport:
    best_fit_percent: float
    mse: float
    fpe: float
    rmse: float
    n_samples: int
    n_params: int

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TransientMetrics:
    rise_time: float
    settling_time: float
    overshoot_percent: float
    steady_state_error: float
    final_value: float

    def as_dict(self) -> dict:
        return asdict(self)


def _pair(measured, simulated, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(measured, TimeSeries) and isinstance(simulated, TimeSeries):
        if not math.isclose(measured.dt, simulated.dt, rel_tol=1e-12):
            raise ConfigError("series have different sample periods")
    y, yhat = values_of(measured), values_of(simulated)
    if y.shape != yhat.shape:
        raise ConfigError(f"series lengths differ: {y.size} vs {yhat.size}")
    if y.size < min_len:
        raise ConfigError(f"need at least {min_len} samples, got {y.size}")
    return y, yhat


def best_fit(measured, simulated) -> float:
    """Normalised-RMSE fit in percent: ``100 (1 - |y - yhat| / |y - mean(y)|)``."""
    y, yhat = _pair(measured, simulated, 2)
    denom = np.linalg.norm(y - y.mean())
    if denom == 0:
        raise MetricUndefinedError("best fit undefined for a constant measured series", "best_fit")
    return float(100.0 * (1.0 - np.linalg.norm(y - yhat) / denom))


def mse(measured, simulated) -> float:
    y, yhat = _pair(measured, simulated, 1)
    r = y - yhat
    return float(np.dot(r, r) / r.size)


def rmse(measured, simulated) -> float:
    return math.sqrt(mse(measured, simulated))


def fpe(mse_value: float, n_samples: int, n_params: int) -> float:
    """Akaike final prediction error ``mse (1 + d/N) / (1 - d/N)``."""
    if n_params < 0 or n_samples <= n_params:
        raise MetricUndefinedError(
            f"FPE needs n_samples > n_params >= 0 (got N={n_samples}, d={n_params})", "fpe"
        )
    ratio = n_params / n_samples
    return mse_value * (1.0 + ratio) / (1.0 - ratio)


def fit_report(measured, simulated, n_params: int) -> FitReport:
    m = mse(measured, simulated)
    n = values_of(measured).size
    return FitReport(
        best_fit_percent=best_fit(measured, simulated),
        mse=m,
        fpe=fpe(m, n, n_params),
        rmse=math.sqrt(m),
        n_samples=n,
        n_params=n_params,
    )


def transient_metrics(response: TimeSeries, reference_level: float,
                      settle_band: float = 0.02, rise_low: float = 0.1,
                      rise_high: float = 0.9) -> TransientMetrics:
    """Rise (10-90 %), settling (+/-2 %) and overshoot of a step response.

    The final value is the mean of the last 10 % of samples; rise-time
    crossings are linearly interpolated, settling time is the first sample
    after which the response never leaves the band. Times are relative to
    ``response.t0``.
    """
    y = response.samples
    n = y.size
    if n < 2:
        raise MetricUndefinedError("response too short", "rise_time")
    tail = y[-max(1, n // 10):]
    final = float(tail.mean())
    if final == 0:
        raise MetricUndefinedError("overshoot undefined for a zero final value", "overshoot")
    band = settle_band * abs(final)
    if np.any(np.abs(tail - final) > band):
        raise MetricUndefinedError("response does not settle within the record", "settling_time")

    sign = 1.0 if final > y[0] else -1.0
    y0 = float(y[0])
    span = final - y0
    dt = response.dt

    def crossing(frac: float) -> float:
        level = y0 + frac * span
        hits = np.flatnonzero(sign * (y - level) >= 0)
        if hits.size == 0:
            raise MetricUndefinedError(f"response never reaches {frac:.0%} of final", "rise_time")
        i = int(hits[0])
        if i == 0:
            return 0.0
        y_prev, y_cur = y[i - 1], y[i]
        return dt * (i - 1 + (level - y_prev) / (y_cur - y_prev))

    rise = crossing(rise_high) - crossing(rise_low) if span != 0 else 0.0

    outside = np.flatnonzero(np.abs(y - final) > band)
    settling = 0.0 if outside.size == 0 else dt * (int(outside[-1]) + 1)

    peak = float(np.max(y)) if final > 0 else float(np.min(y))
    overshoot = max(0.0, 100.0 * (peak - final) / final)

    return TransientMetrics(
        rise_time=max(rise, 0.0),
        settling_time=settling,
        overshoot_percent=overshoot,
        steady_state_error=reference_level - final,
        final_value=final,
    )
