"""Black-box ARX identification.

The model structure is ``A(q) y(t) = B(q) u(t - nk)`` with
``A(q) = 1 + a1 q^-1 + ... + a_na q^-na`` and
``B(q) = b1 + b2 q^-1 + ... + b_nb q^-(nb-1)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.signal import lfilter, lfiltic

from .errors import ConfigError, DataError, DivergenceError, IdentifiabilityError
from .metrics import FitReport, fit_report
from .timeseries import TimeSeries

COND_LIMIT = 1e12


@dataclass(frozen=True)
class ArxModel:
    na: int
    nb: int
    nk: int
    a: tuple[float, ...]
    b: tuple[float, ...]
    Ts: float
    u_mean: float = 0.0
    y_mean: float = 0.0

    def __post_init__(self):
        a = tuple(float(c) for c in self.a)
        b = tuple(float(c) for c in self.b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if self.na < 0 or self.nb < 1 or self.nk < 0:
            raise ConfigError(f"invalid ARX orders ({self.na}, {self.nb}, {self.nk})")
        if len(a) != self.na or len(b) != self.nb:
            raise ConfigError("coefficient counts do not match the model orders")
        if not self.Ts > 0:
            raise ConfigError("sampling period must be positive")
        if not all(math.isfinite(c) for c in a + b + (self.u_mean, self.y_mean)):
            raise ConfigError("ARX coefficients must be finite")

    @property
    def orders(self) -> tuple[int, int, int]:
        return (self.na, self.nb, self.nk)

    @property
    def n_params(self) -> int:
        return self.na + self.nb

    @property
    def history(self) -> int:
        """Samples of past data the predictor needs."""
        return max(self.na, self.nk + self.nb - 1)

    def filter_coeffs(self) -> tuple[np.ndarray, np.ndarray]:
        num = np.concatenate([np.zeros(self.nk), self.b])
        den = np.concatenate([[1.0], self.a])
        return num, den


@dataclass(frozen=True)
class Dataset:
    u: TimeSeries
    y: TimeSeries

    def __post_init__(self):
        if not self.u.aligned_with(self.y):
            raise DataError("input and output series are not aligned")

    def __len__(self) -> int:
        return len(self.u)

    @property
    def dt(self) -> float:
        return self.u.dt

    def slice(self, start: int, stop: int | None = None) -> Dataset:
        return Dataset(self.u.slice(start, stop), self.y.slice(start, stop))


@dataclass(frozen=True)
class SplitSpec:
    estimation_fraction: float

    def __post_init__(self):
        if not 0 < self.estimation_fraction < 1:
            raise ConfigError("estimation fraction must lie in (0, 1)")


def min_length(na: int, nb: int) -> int:
    return 10 * (na + nb)


def resample(series: TimeSeries, target_dt: float) -> TimeSeries:
    """Decimate by an integer factor after a causal moving average of the
    same length (shorter windows over the first samples)."""
    ratio = target_dt / series.dt
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9 * max(ratio, 1.0):
        raise ConfigError(
            f"target period {target_dt:g} s is not an integer multiple of {series.dt:g} s"
        )
    if factor == 1:
        return series
    x = series.samples
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(0, x.size, factor)
    lo = np.maximum(idx + 1 - factor, 0)
    avg = (csum[idx + 1] - csum[lo]) / (idx + 1 - lo)
    return TimeSeries(series.t0, series.dt * factor, avg)


def resample_dataset(data: Dataset, target_dt: float) -> Dataset:
    return Dataset(resample(data.u, target_dt), resample(data.y, target_dt))


def split_dataset(data: Dataset, spec: SplitSpec,
                  orders: tuple[int, int, int] | None = None) -> tuple[Dataset, Dataset]:
    """Contiguous estimation prefix and validation remainder."""
    n = len(data)
    n_est = int(math.floor(spec.estimation_fraction * n + 0.5))
    need = min_length(orders[0], orders[1]) if orders else 2
    if n_est < need or n - n_est < need:
        raise DataError(
            f"split of {n} samples into {n_est}/{n - n_est} leaves a part shorter "
            f"than the required {need}"
        )
    return data.slice(0, n_est), data.slice(n_est)


def regressor(u: np.ndarray, y: np.ndarray, na: int, nb: int, nk: int):
    """Regression matrix and target vector for rows ``t >= max(na, nk+nb-1)``."""
    n0 = max(na, nk + nb - 1)
    n = y.size
    phi = np.empty((n - n0, na + nb))
    for i in range(na):
        phi[:, i] = -y[n0 - 1 - i:n - 1 - i]
    for j in range(nb):
        lag = nk + j
        phi[:, na + j] = u[n0 - lag:n - lag]
    return phi, y[n0:]


def arx_fit(data: Dataset, na: int, nb: int, nk: int, detrend: bool = False) -> ArxModel:
    """Least-squares ARX estimate via QR factorisation of the regressor.

    With ``detrend`` the input and output means are removed first and stored
    on the model.
    """
    if na < 0 or nb < 1 or nk < 0:
        raise ConfigError(f"invalid ARX orders ({na}, {nb}, {nk})")
    n = len(data)
    if n < min_length(na, nb):
        raise DataError(f"ARX({na},{nb},{nk}) needs at least {min_length(na, nb)} samples, got {n}")
    u, y = data.u.samples, data.y.samples
    u_mean = float(u.mean()) if detrend else 0.0
    y_mean = float(y.mean()) if detrend else 0.0
    phi, target = regressor(u - u_mean, y - y_mean, na, nb, nk)

    q, r = np.linalg.qr(phi, mode="reduced")
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(r)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IdentifiabilityError(
            f"regressor condition number {cond:.3g} exceeds {COND_LIMIT:.0e}: "
            f"input is not persistently exciting for ARX({na},{nb},{nk})"
        )
    theta = scipy.linalg.solve_triangular(r, q.T @ target)
    return ArxModel(na, nb, nk, theta[:na], theta[na:], data.dt, u_mean, y_mean)


def arx_simulate(model: ArxModel, u: TimeSeries, y_init=None, u_init=None) -> TimeSeries:
    """Free-run simulation driven by ``u`` alone.

    ``y_init`` holds the ``na`` outputs preceding the first sample and
    ``u_init`` the ``nk+nb-1`` preceding inputs, both oldest first and in the
    data's own units; missing history means the system was at rest.
    """
    if not math.isclose(u.dt, model.Ts, rel_tol=1e-9):
        raise ConfigError(f"input period {u.dt:g} s differs from model period {model.Ts:g} s")
    num, den = model.filter_coeffs()
    y_hist = np.zeros(model.na)
    if y_init is not None and model.na:
        past = np.asarray(y_init, dtype=float)[-model.na:] - model.y_mean
        y_hist[model.na - past.size:] = past
    n_u = model.nk + model.nb - 1
    u_hist = np.zeros(n_u)
    if u_init is not None and n_u:
        past = np.asarray(u_init, dtype=float)[-n_u:] - model.u_mean
        u_hist[n_u - past.size:] = past
    with np.errstate(all="ignore"):
        zi = lfiltic(num, den, y_hist[::-1], u_hist[::-1]) if max(num.size, den.size) > 1 else None
        x = u.samples - model.u_mean
        if zi is None:
            out = lfilter(num, den, x)
        else:
            out, _ = lfilter(num, den, x, zi=zi)
        out = out + model.y_mean
    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        raise DivergenceError(f"ARX simulation diverged at sample {int(bad[0])}", int(bad[0]))
    return TimeSeries(u.t0, u.dt, out)


def simulate_after(model: ArxModel, history: Dataset, data: Dataset) -> TimeSeries:
    """Free-run over ``data`` with initial conditions taken from the end of
    ``history`` (typically the estimation set preceding a validation set)."""
    return arx_simulate(model, data.u, history.y.samples, history.u.samples)


def validate(model: ArxModel, estimation: Dataset, validation: Dataset) -> FitReport:
    simulated = simulate_after(model, estimation, validation)
    return fit_report(validation.y, simulated, model.n_params)


@dataclass(frozen=True)
class Candidate:
    orders: tuple[int, int, int]
    report: FitReport | None
    model: ArxModel | None = None
    error: str | None = None


def _rank_key(c: Candidate, scale: float):
    if c.report is None:
        return (1, 0.0, 0.0, 0, c.orders)
    # best fit to 1e-6 %, FPE relative to the output variance; exact ties on
    # both resolve towards fewer parameters
    return (
        0,
        -round(c.report.best_fit_percent, 6),
        round(c.report.fpe / scale, 12),
        c.report.n_params,
        c.orders,
    )


def order_search(data: Dataset, na_range, nb_range, nk_range,
                 split: SplitSpec = SplitSpec(0.5), detrend: bool = False) -> list[Candidate]:
    """Fit every order combination on the estimation part and rank by
    free-run best fit on the validation part (FPE breaks ties).

    Candidates that could not be fitted are listed last with their error.
    """
    combos = list(itertools.product(na_range, nb_range, nk_range))
    if not combos:
        raise ConfigError("order search ranges must be non-empty")
    estimation, validation = split_dataset(data, split)
    scale = float(np.var(validation.y.samples)) or 1.0
    results = []
    for na, nb, nk in combos:
        orders = (int(na), int(nb), int(nk))
        try:
            model = arx_fit(estimation, *orders, detrend=detrend)
            report = validate(model, estimation, validation)
            results.append(Candidate(orders, report, model))
        except (IdentifiabilityError, DataError, DivergenceError, ConfigError) as exc:
            results.append(Candidate(orders, None, None, str(exc)))
    if all(c.report is None for c in results):
        details = "; ".join(f"{c.orders}: {c.error}" for c in results)
        raise IdentifiabilityError(f"no candidate order could be identified ({details})")
    return sorted(results, key=lambda c: _rank_key(c, scale))
