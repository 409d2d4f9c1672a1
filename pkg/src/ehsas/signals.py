"""Excitation and reference signal generators.

All generators sample at ``t = 0, dt, 2*dt, ...`` up to the largest multiple
of ``dt`` not exceeding the duration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .timeseries import TimeSeries

DEFAULT_AMPLITUDE = 9.0

TEST_SIGNAL_KINDS = ("step", "sine", "square", "triangular", "sawtooth", "staircase")


def _sample_times(duration: float, dt: float) -> np.ndarray:
    n = int(math.floor(duration / dt + 1e-9)) + 1
    return dt * np.arange(n)


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


@dataclass(frozen=True)
class ChirpSpec:
    amplitude: float
    f0: float
    f1: float
    duration: float
    dt: float
    phase: float = 0.0

    def __post_init__(self):
        _require(self.amplitude > 0, "chirp amplitude must be positive")
        _require(0 < self.f0 <= self.f1, "chirp needs 0 < f0 <= f1")
        _require(self.duration > 0 and self.dt > 0, "chirp duration and dt must be positive")
        _require(
            self.dt <= 1.0 / (2.0 * self.f1),
            f"chirp dt={self.dt:g} s violates Nyquist for f1={self.f1:g} Hz",
        )

    @property
    def sweep_rate(self) -> float:
        return (self.f1 - self.f0) / self.duration


@dataclass(frozen=True)
class MultisineSpec:
    amplitude: float
    frequencies: tuple[float, ...]  # rad/s
    duration: float
    dt: float

    def __post_init__(self):
        freqs = tuple(float(w) for w in self.frequencies)
        object.__setattr__(self, "frequencies", freqs)
        _require(self.amplitude > 0, "multisine amplitude must be positive")
        _require(len(freqs) > 0, "multisine needs at least one component")
        _require(all(w > 0 for w in freqs), "multisine frequencies must be positive")
        _require(len(set(freqs)) == len(freqs), "multisine frequencies must be distinct")
        _require(self.duration > 0 and self.dt > 0, "multisine duration and dt must be positive")
        _require(
            self.dt <= math.pi / max(freqs),
            f"multisine dt={self.dt:g} s violates Nyquist for {max(freqs):g} rad/s",
        )


@dataclass(frozen=True)
class TestSignalSpec:
    kind: str
    amplitude: float
    duration: float
    dt: float
    frequency: float = 0.0  # Hz, ignored for step and staircase
    staircase_levels: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        _require(self.kind in TEST_SIGNAL_KINDS, f"unknown test signal kind {self.kind!r}")
        _require(self.amplitude > 0, "test signal amplitude must be positive")
        _require(self.duration > 0 and self.dt > 0, "test signal duration and dt must be positive")
        levels = tuple((float(h), float(v)) for h, v in self.staircase_levels)
        object.__setattr__(self, "staircase_levels", levels)
        if self.kind in ("sine", "square", "triangular", "sawtooth"):
            _require(self.frequency > 0, f"{self.kind} needs a positive frequency")
        if self.kind == "staircase":
            _require(len(levels) > 0, "staircase needs at least one (hold, level) pair")
            _require(all(h > 0 for h, _ in levels), "staircase hold durations must be positive")
            _require(
                all(abs(v) <= self.amplitude for _, v in levels),
                "staircase levels must not exceed the amplitude",
            )


def excitation_band(omega_bw: float) -> tuple[float, float]:
    """Excitation band ``(0.1*wBw, 2*wBw)`` in rad/s."""
    if not omega_bw > 0:
        raise ConfigError(f"bandwidth must be positive, got {omega_bw!r}")
    return 0.1 * omega_bw, 2.0 * omega_bw


def multisine_frequencies(omega_bw: float) -> list[float]:
    if not omega_bw > 0:
        raise ConfigError(f"bandwidth must be positive, got {omega_bw!r}")
    return [0.1 * omega_bw, 0.5 * omega_bw, 2.0 * omega_bw]


def chirp(spec: ChirpSpec) -> TimeSeries:
    """Linear sweep ``A cos(phi0 + 2*pi*(k/2 t^2 + f0 t))``."""
    t = _sample_times(spec.duration, spec.dt)
    phase = spec.phase + 2.0 * math.pi * (0.5 * spec.sweep_rate * t**2 + spec.f0 * t)
    return TimeSeries(0.0, spec.dt, spec.amplitude * np.cos(phase))


def chirp_for_band(omega_min: float, omega_max: float, amplitude: float,
                   duration: float, dt: float, phase: float = 0.0) -> TimeSeries:
    """Chirp sweeping the band given in rad/s."""
    return chirp(ChirpSpec(amplitude, omega_min / (2 * math.pi), omega_max / (2 * math.pi),
                           duration, dt, phase))


def multisine(spec: MultisineSpec) -> TimeSeries:
    t = _sample_times(spec.duration, spec.dt)
    total = np.zeros_like(t)
    for w in spec.frequencies:
        total += np.sin(w * t)
    return TimeSeries(0.0, spec.dt, spec.amplitude * total)


def test_signal(spec: TestSignalSpec) -> TimeSeries:
    t = _sample_times(spec.duration, spec.dt)
    a, kind = spec.amplitude, spec.kind
    cycles = spec.frequency * t
    frac = cycles - np.floor(cycles)
    if kind == "step":
        x = np.where(t > 0, a, 0.0)
    elif kind == "sine":
        x = a * np.sin(2.0 * math.pi * cycles)
    elif kind == "square":
        x = np.where(frac < 0.5, a, -a)
    elif kind == "triangular":
        # starts at 0 rising, peaks at quarter period like a sine
        x = a * (1.0 - 4.0 * np.abs((frac + 0.25) % 1.0 - 0.5))
    elif kind == "sawtooth":
        x = a * (2.0 * frac - 1.0)
    else:
        edges = np.cumsum([h for h, _ in spec.staircase_levels])
        idx = np.searchsorted(edges, t + 1e-12 * spec.dt, side="right")
        levels = np.array([v for _, v in spec.staircase_levels])
        x = levels[np.minimum(idx, levels.size - 1)]
    return TimeSeries(0.0, spec.dt, x)


# keep pytest from collecting these when imported into test modules
test_signal.__test__ = False
TestSignalSpec.__test__ = False
