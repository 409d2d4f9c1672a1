"""Unit tags accepted in parameter files and their SI conversion factors."""

from __future__ import annotations

from .errors import ConfigError

INCH = 0.0254
PSI = 6894.757293168361
POUND = 0.45359237
LBF = 4.4482216152605

# tag -> (dimension, factor to SI)
UNITS: dict[str, tuple[str, float]] = {
    "Pa": ("pressure", 1.0),
    "kPa": ("pressure", 1e3),
    "MPa": ("pressure", 1e6),
    "bar": ("pressure", 1e5),
    "psi": ("pressure", PSI),
    "m": ("length", 1.0),
    "cm": ("length", 1e-2),
    "mm": ("length", 1e-3),
    "in": ("length", INCH),
    "ft": ("length", 12 * INCH),
    "m2": ("area", 1.0),
    "cm2": ("area", 1e-4),
    "mm2": ("area", 1e-6),
    "in2": ("area", INCH**2),
    "m3": ("volume", 1.0),
    "L": ("volume", 1e-3),
    "cm3": ("volume", 1e-6),
    "in3": ("volume", INCH**3),
    "kg": ("mass", 1.0),
    "lb": ("mass", POUND),
    "kg/m3": ("density", 1.0),
    "N": ("force", 1.0),
    "lbf": ("force", LBF),
    "N/m": ("stiffness", 1.0),
    "lbf/in": ("stiffness", LBF / INCH),
    "N/(m/s)": ("damping", 1.0),
    "N*s/m": ("damping", 1.0),
    "V": ("voltage", 1.0),
    "m/V": ("valve_gain", 1.0),
    "mm/V": ("valve_gain", 1e-3),
    "m/s": ("velocity", 1.0),
    "mm/s": ("velocity", 1e-3),
    "m3/(s*Pa)": ("flow_pressure", 1.0),
    "m2/s": ("flow_gain", 1.0),
    "m/(V*s)": ("actuator_gain", 1.0),
    "1": ("dimensionless", 1.0),
}


def to_si(value: float, unit: str, dimension: str) -> float:
    try:
        dim, factor = UNITS[unit]
    except KeyError:
        raise ConfigError(f"unknown unit tag {unit!r}") from None
    if dim != dimension:
        raise ConfigError(f"unit {unit!r} is a {dim} unit, expected {dimension}")
    return value * factor


def parse_quantity(text: str, dimension: str) -> float:
    """Parse ``"12.5 in2"`` into SI. A bare number is only accepted for
    dimensionless entries."""
    parts = text.split()
    if not parts or len(parts) > 2:
        raise ConfigError(f"cannot parse quantity {text!r}")
    try:
        value = float(parts[0])
    except ValueError:
        raise ConfigError(f"cannot parse number in {text!r}") from None
    if len(parts) == 1:
        if dimension != "dimensionless":
            raise ConfigError(f"missing unit tag in {text!r} ({dimension} expected)")
        return value
    return to_si(value, parts[1], dimension)
