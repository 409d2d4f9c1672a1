"""CSV and text artifacts.

Every number is written with 17 significant digits, so any double read back
is bit-identical to the one written.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .control import ClosedLoopResult
from .errors import ConfigError, DataError
from .plant import Trajectory
from .sysid import ArxModel, Dataset
from .timeseries import TimeSeries

NUMBER_FORMAT = "%.17g"

TRAJECTORY_HEADER = ("t", "u", "xp", "vp", "p1", "p2")
DATASET_HEADER = ("t", "u", "y")
SIGNAL_HEADER = ("t", "value")
CLOSED_LOOP_HEADER = ("t", "r", "y", "u", "e", "k")


def fmt(x: float) -> str:
    return NUMBER_FORMAT % x


def write_columns(path, header, columns) -> None:
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in data)
    Path(path).write_text("\n".join(lines) + "\n")


def read_columns(path, header) -> dict[str, np.ndarray]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path} is empty")
    found = tuple(h.strip() for h in lines[0].split(","))
    if found != tuple(header):
        raise DataError(f"{path}: expected header {','.join(header)}, found {lines[0]!r}")
    if len(lines) < 2:
        raise DataError(f"{path} has no data rows")
    try:
        rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
        data = np.array(rows, dtype=float)
    except ValueError:
        raise DataError(f"{path}: malformed numeric row") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise DataError(f"{path}: every row needs {len(header)} fields")
    if not np.all(np.isfinite(data)):
        raise DataError(f"{path}: non-finite value")
    return {name: data[:, i].copy() for i, name in enumerate(header)}


def uniform_grid(t: np.ndarray) -> tuple[float, float]:
    """Recover ``(t0, dt)`` such that ``t0 + dt * k`` reproduces ``t``."""
    if t.size < 2:
        raise DataError("need at least two time stamps to infer the sample period")
    t0 = float(t[0])
    mean_step = (t[-1] - t[0]) / (t.size - 1)
    candidates = [t[1] - t[0], float(f"{mean_step:.12g}"), mean_step]
    k = np.arange(t.size)
    for dt in candidates:
        if dt > 0 and np.array_equal(t0 + dt * k, t):
            return t0, float(dt)
    dt = float(f"{mean_step:.12g}")
    if dt > 0 and np.allclose(t0 + dt * k, t, rtol=0, atol=1e-9 * dt * t.size):
        return t0, dt
    raise DataError("time column is not uniformly sampled")


def write_series(path, series: TimeSeries) -> None:
    write_columns(path, SIGNAL_HEADER, [series.times, series.samples])


def read_series(path) -> TimeSeries:
    cols = read_columns(path, SIGNAL_HEADER)
    t0, dt = uniform_grid(cols["t"])
    return TimeSeries(t0, dt, cols["value"])


def write_dataset(path, data: Dataset) -> None:
    write_columns(path, DATASET_HEADER, [data.u.times, data.u.samples, data.y.samples])


def read_dataset(path) -> Dataset:
    cols = read_columns(path, DATASET_HEADER)
    t0, dt = uniform_grid(cols["t"])
    return Dataset(TimeSeries(t0, dt, cols["u"]), TimeSeries(t0, dt, cols["y"]))


def write_trajectory(path, traj: Trajectory) -> None:
    write_columns(path, TRAJECTORY_HEADER,
                  [traj.t, traj.u, traj.xp, traj.vp, traj.p1, traj.p2])


def read_trajectory(path) -> Trajectory:
    cols = read_columns(path, TRAJECTORY_HEADER)
    return Trajectory(**cols)


def write_closed_loop(path, result: ClosedLoopResult) -> None:
    write_columns(path, CLOSED_LOOP_HEADER, [
        result.position.times, result.reference.samples, result.position.samples,
        result.command.samples, result.error.samples, result.gain.samples,
    ])


def read_closed_loop(path) -> dict[str, np.ndarray]:
    return read_columns(path, CLOSED_LOOP_HEADER)


# --- model files -----------------------------------------------------------

_MODEL_KEYS = ("na", "nb", "nk", "Ts", "a", "b", "u_mean", "y_mean")


def format_model(model: ArxModel) -> str:
    lines = [
        f"na = {model.na}",
        f"nb = {model.nb}",
        f"nk = {model.nk}",
        f"Ts = {fmt(model.Ts)}",
        "a = " + ", ".join(fmt(c) for c in model.a),
        "b = " + ", ".join(fmt(c) for c in model.b),
        f"u_mean = {fmt(model.u_mean)}",
        f"y_mean = {fmt(model.y_mean)}",
    ]
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> ArxModel:
    values: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise ConfigError(f"model file line {n}: expected 'key = value'")
        if key not in _MODEL_KEYS:
            raise ConfigError(f"model file line {n}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"model file line {n}: duplicate key {key!r}")
        values[key] = value
    missing = [k for k in _MODEL_KEYS[:6] if k not in values]
    if missing:
        raise ConfigError(f"model file is missing {', '.join(missing)}")

    def coeffs(key):
        text = values[key]
        return tuple(float(c) for c in text.split(",")) if text else ()

    try:
        return ArxModel(
            na=int(values["na"]), nb=int(values["nb"]), nk=int(values["nk"]),
            a=coeffs("a"), b=coeffs("b"), Ts=float(values["Ts"]),
            u_mean=float(values.get("u_mean", "0")),
            y_mean=float(values.get("y_mean", "0")),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"model file has a malformed number: {exc}") from None


def write_model(path, model: ArxModel) -> None:
    Path(path).write_text(format_model(model))


def read_model(path) -> ArxModel:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read model file {path}: {exc.strerror}") from None
    return parse_model(text)


# --- reports ---------------------------------------------------------------


def write_report(path, rows, title: str = "") -> None:
    """``metric,value`` CSV at ``path`` and a readable table next to it
    (same name, ``.txt`` suffix)."""
    path = Path(path)
    lines = ["metric,value"]
    for name, value in rows:
        lines.append(f"{name},{fmt(value) if isinstance(value, float) else value}")
    path.write_text("\n".join(lines) + "\n")
    path.with_suffix(".txt").write_text(format_table(rows, title))


def format_table(rows, title: str = "") -> str:
    width = max((len(name) for name, _ in rows), default=0)
    out = [title, "=" * len(title)] if title else []
    for name, value in rows:
        shown = f"{value:.6g}" if isinstance(value, float) and math.isfinite(value) else str(value)
        out.append(f"{name.ljust(width)}  {shown}")
    return "\n".join(out) + "\n"


def read_report(path) -> dict[str, float]:
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != "metric,value":
        raise DataError(f"{path}: not a metric report")
    out = {}
    for ln in lines[1:]:
        name, _, value = ln.partition(",")
        out[name] = float(value)
    return out
