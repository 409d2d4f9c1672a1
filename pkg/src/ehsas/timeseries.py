from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled signal starting at ``t0`` with period ``dt``."""

    t0: float
    dt: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.samples, dtype=float).ravel()
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"sample period must be positive, got {self.dt!r}")
        if not np.isfinite(self.t0):
            raise ConfigError(f"start time must be finite, got {self.t0!r}")
        if values.size == 0:
            raise InputError("time series has no samples")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise InputError(f"non-finite sample at index {bad}")
        values.flags.writeable = False
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "samples", values)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def duration(self) -> float:
        return self.dt * (self.samples.size - 1)

    def with_samples(self, samples) -> TimeSeries:
        return TimeSeries(self.t0, self.dt, samples)

    def slice(self, start: int, stop: int | None = None) -> TimeSeries:
        stop = len(self) if stop is None else stop
        return TimeSeries(self.t0 + start * self.dt, self.dt, self.samples[start:stop])

    def aligned_with(self, other: TimeSeries) -> bool:
        return (
            len(self) == len(other)
            and self.dt == other.dt
            and self.t0 == other.t0
        )


def values_of(x) -> np.ndarray:
    """Sample array of a TimeSeries, or ``x`` itself as a float array."""
    if isinstance(x, TimeSeries):
        return x.samples
    return np.asarray(x, dtype=float)
