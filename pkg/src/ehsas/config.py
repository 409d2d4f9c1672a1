"""INI experiment configuration.

Sections and keys (all optional unless a command needs them):

``[plant]``
    Any :class:`PlantParams` field as ``name = value unit``, e.g.
    ``piston_area = 12.5 in2``. Dimensionless entries take a bare number.
``[simulation]``
    ``duration`` (s), ``dt`` (s, at most 1 ms), ``initial_position`` (``mid``
    or a length with unit).
``[excitation]``
    ``signal`` (chirp, multisine, zero or a test-signal kind), ``amplitude``
    (V; per tone for multisine), ``bandwidth`` (rad/s or ``auto``), ``phase``
    (rad), ``frequency`` (Hz, test signals), ``levels`` (``hold:level, ...``).
``[identification]``
    ``orders`` (``na, nb, nk``) or the search ranges ``na``, ``nb``, ``nk``
    (``lo-hi``), ``split``, ``sample_period`` (s), ``detrend`` (bool).
``[validation]``
    ``signals``, ``amplitudes`` (V), ``frequencies`` (Hz), ``duration`` (s).
``[controller]``
    ``gains`` (``Kp, Ki, Kd`` or ``auto-zn``), ``k0``, ``k1``, ``k2``,
    ``u_min``, ``u_max`` (V), ``derivative_filter_tau`` (s), ``anti_windup``,
    ``reference`` (step, staircase or sine), ``reference_amplitude`` (m),
    ``reference_frequency`` (Hz), ``reference_levels`` (``hold:level, ...`` in
    s and m), ``duration`` (s), ``zn_gain_min``, ``zn_gain_max``.
``[output]``
    ``directory``, ``seed`` (reserved; every pipeline is deterministic).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .plant import MAX_STEP, PlantParams
from .signals import DEFAULT_AMPLITUDE, TEST_SIGNAL_KINDS
from .units import parse_quantity

PLANT_DIMENSIONS = {
    "supply_pressure": "pressure",
    "return_pressure": "pressure",
    "servo_valve_gain": "valve_gain",
    "max_opening": "length",
    "discharge_coeff": "dimensionless",
    "leakage_area": "area",
    "valve_area": "area",
    "fluid_density": "density",
    "piston_area": "area",
    "piston_stroke": "length",
    "dead_volume": "volume",
    "bulk_modulus": "pressure",
    "load_mass": "mass",
    "spring_stiffness": "stiffness",
    "damping_coeff": "damping",
    "coulomb_friction": "force",
    "viscous_friction": "damping",
    "contact_stiffness": "stiffness",
    "contact_damping": "damping",
    "flow_gain_coeff": "flow_gain",
    "flow_pressure_coeff": "flow_pressure",
    "total_leakage_coeff": "flow_pressure",
    "actuator_gain": "actuator_gain",
    "specific_heat_ratio": "dimensionless",
    "input_limit": "voltage",
    "friction_smoothing_velocity": "velocity",
}
assert set(PLANT_DIMENSIONS) == {f.name for f in fields(PlantParams)}

EXCITATION_KINDS = ("chirp", "multisine", "zero") + TEST_SIGNAL_KINDS
VALIDATION_KINDS = ("triangular", "square", "sine", "sawtooth")
REFERENCE_KINDS = ("step", "staircase", "sine")


@dataclass(frozen=True)
class SimulationSection:
    duration: float = 50.0
    dt: float = 1e-3
    initial_position: float | None = None  # None means mid-stroke


@dataclass(frozen=True)
class ExcitationSection:
    signal: str = "chirp"
    amplitude: float = DEFAULT_AMPLITUDE
    bandwidth: float | None = 2 * math.pi  # None means computed from the plant
    phase: float = 0.0
    frequency: float = 0.0
    levels: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class IdentificationSection:
    orders: tuple[int, int, int] | None = (3, 3, 1)
    na_range: tuple[int, ...] = ()
    nb_range: tuple[int, ...] = ()
    nk_range: tuple[int, ...] = ()
    split: float = 0.8
    sample_period: float = 0.05
    detrend: bool = False


@dataclass(frozen=True)
class ValidationSection:
    signals: tuple[str, ...] = VALIDATION_KINDS
    amplitudes: tuple[float, ...] = (3.0, 6.0, 9.0)
    frequencies: tuple[float, ...] = (0.1, 0.5, 1.0)
    duration: float = 20.0


@dataclass(frozen=True)
class ControllerSection:
    gains: tuple[float, float, float] | None = (20000.0, 40000.0, 200.0)  # None: auto-zn
    k0: float = 1.0
    k1: float = 3.0
    k2: float = 0.05
    u_min: float = -10.0
    u_max: float = 10.0
    derivative_filter_tau: float | None = None
    anti_windup: bool = True
    reference: str = "step"
    reference_amplitude: float = 1e-3
    reference_frequency: float = 0.2
    reference_levels: tuple[tuple[float, float], ...] = ()
    duration: float = 10.0
    zn_gain_min: float = 1.0
    zn_gain_max: float = 1e8


@dataclass(frozen=True)
class ExperimentConfig:
    plant: PlantParams | None = None
    simulation: SimulationSection | None = None
    excitation: ExcitationSection | None = None
    identification: IdentificationSection | None = None
    validation: ValidationSection | None = None
    controller: ControllerSection | None = None
    output_directory: str = "out"
    seed: int = 0
    source: str = field(default="", compare=False)

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            where = f" in {self.source}" if self.source else ""
            raise ConfigError(f"missing [{missing[0]}] section{where}")


# --- value parsers ---------------------------------------------------------


def _float(text: str, key: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite")
    return value


def _positive(text: str, key: str) -> float:
    value = _float(text, key)
    if value <= 0:
        raise ConfigError(f"{key}: must be positive")
    return value


def _int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _bool(text: str, key: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected true or false, got {text!r}")


def _list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def parse_orders(text: str) -> tuple[int, int, int]:
    parts = _list(text)
    if len(parts) != 3:
        raise ConfigError(f"orders: expected 'na, nb, nk', got {text!r}")
    na, nb, nk = (_int(p, "orders") for p in parts)
    if na < 0 or nb < 1 or nk < 0:
        raise ConfigError(f"orders: need na >= 0, nb >= 1, nk >= 0, got {text!r}")
    return na, nb, nk


def parse_range(text: str, key: str) -> tuple[int, ...]:
    lo, sep, hi = text.partition("-")
    if sep:
        a, b = _int(lo.strip(), key), _int(hi.strip(), key)
        if a > b:
            raise ConfigError(f"{key}: empty range {text!r}")
        return tuple(range(a, b + 1))
    return tuple(_int(p, key) for p in _list(text))


def parse_gains(text: str) -> tuple[float, float, float] | None:
    if text.strip().lower() == "auto-zn":
        return None
    parts = _list(text)
    if len(parts) != 3:
        raise ConfigError(f"gains: expected 'Kp, Ki, Kd' or 'auto-zn', got {text!r}")
    gains = tuple(_float(p, "gains") for p in parts)
    if min(gains) < 0:
        raise ConfigError("gains: PID gains must be non-negative")
    return gains


def parse_split(text: str) -> float:
    value = _float(text, "split")
    if not 0 < value < 1:
        raise ConfigError("split: estimation fraction must lie in (0, 1)")
    return value


def _levels(text: str, key: str) -> tuple[tuple[float, float], ...]:
    out = []
    for item in _list(text):
        hold, sep, level = item.partition(":")
        if not sep:
            raise ConfigError(f"{key}: expected 'hold:level' pairs, got {item!r}")
        out.append((_positive(hold.strip(), key), _float(level.strip(), key)))
    return tuple(out)


# --- sections --------------------------------------------------------------


def _check_keys(section: str, items: dict, allowed) -> None:
    unknown = sorted(set(items) - set(allowed))
    if unknown:
        raise ConfigError(f"[{section}] unknown key {unknown[0]!r}")


def _plant(items: dict) -> PlantParams:
    _check_keys("plant", items, PLANT_DIMENSIONS)
    values = {k: parse_quantity(v, PLANT_DIMENSIONS[k]) for k, v in items.items()}
    return PlantParams(**values)


def _simulation(items: dict) -> SimulationSection:
    _check_keys("simulation", items, ("duration", "dt", "initial_position"))
    out = {}
    if "duration" in items:
        out["duration"] = _positive(items["duration"], "duration")
    if "dt" in items:
        out["dt"] = _positive(items["dt"], "dt")
        if out["dt"] > MAX_STEP:
            raise ConfigError(f"dt: simulation step must not exceed {MAX_STEP:g} s")
    if "initial_position" in items and items["initial_position"].strip() != "mid":
        out["initial_position"] = parse_quantity(items["initial_position"], "length")
    return SimulationSection(**out)


def _excitation(items: dict) -> ExcitationSection:
    _check_keys("excitation", items,
                ("signal", "amplitude", "bandwidth", "phase", "frequency", "levels"))
    out = {}
    if "signal" in items:
        kind = items["signal"].strip()
        if kind not in EXCITATION_KINDS:
            raise ConfigError(f"signal: unknown kind {kind!r}")
        out["signal"] = kind
    if "amplitude" in items:
        out["amplitude"] = _positive(items["amplitude"], "amplitude")
    if "bandwidth" in items:
        text = items["bandwidth"].strip()
        out["bandwidth"] = None if text == "auto" else _positive(text, "bandwidth")
    if "phase" in items:
        out["phase"] = _float(items["phase"], "phase")
    if "frequency" in items:
        out["frequency"] = _positive(items["frequency"], "frequency")
    if "levels" in items:
        out["levels"] = _levels(items["levels"], "levels")
    return ExcitationSection(**out)


def _identification(items: dict) -> IdentificationSection:
    _check_keys("identification", items,
                ("orders", "na", "nb", "nk", "split", "sample_period", "detrend"))
    out = {}
    search = [k for k in ("na", "nb", "nk") if k in items]
    if search:
        if "orders" in items:
            raise ConfigError("[identification] give either orders or search ranges, not both")
        if len(search) != 3:
            raise ConfigError("[identification] order search needs na, nb and nk ranges")
        out["orders"] = None
        for k in search:
            out[f"{k}_range"] = parse_range(items[k], k)
    elif "orders" in items:
        out["orders"] = parse_orders(items["orders"])
    if "split" in items:
        out["split"] = parse_split(items["split"])
    if "sample_period" in items:
        out["sample_period"] = _positive(items["sample_period"], "sample_period")
    if "detrend" in items:
        out["detrend"] = _bool(items["detrend"], "detrend")
    return IdentificationSection(**out)


def parse_validation_signals(text: str) -> tuple[str, ...]:
    kinds = tuple(_list(text))
    if not kinds:
        raise ConfigError("signals: at least one test signal is needed")
    for kind in kinds:
        if kind not in VALIDATION_KINDS:
            raise ConfigError(f"signals: unknown validation signal {kind!r}")
    return kinds


def _validation(items: dict) -> ValidationSection:
    _check_keys("validation", items, ("signals", "amplitudes", "frequencies", "duration"))
    out = {}
    if "signals" in items:
        out["signals"] = parse_validation_signals(items["signals"])
    for key in ("amplitudes", "frequencies"):
        if key in items:
            values = tuple(_positive(p, key) for p in _list(items[key]))
            if not values:
                raise ConfigError(f"{key}: at least one value is needed")
            out[key] = values
    if "duration" in items:
        out["duration"] = _positive(items["duration"], "duration")
    return ValidationSection(**out)


def _controller(items: dict) -> ControllerSection:
    allowed = [f.name for f in fields(ControllerSection)]
    _check_keys("controller", items, allowed)
    out = {}
    if "gains" in items:
        out["gains"] = parse_gains(items["gains"])
    for key in ("k0", "k1", "k2", "u_min", "u_max", "reference_amplitude"):
        if key in items:
            out[key] = _float(items[key], key)
    for key in ("derivative_filter_tau",):
        if key in items:
            out[key] = _float(items[key], key)
    for key in ("reference_frequency", "duration", "zn_gain_min", "zn_gain_max"):
        if key in items:
            out[key] = _positive(items[key], key)
    if "anti_windup" in items:
        out["anti_windup"] = _bool(items["anti_windup"], "anti_windup")
    if "reference" in items:
        kind = items["reference"].strip()
        if kind not in REFERENCE_KINDS:
            raise ConfigError(f"reference: unknown kind {kind!r}")
        out["reference"] = kind
    if "reference_levels" in items:
        out["reference_levels"] = _levels(items["reference_levels"], "reference_levels")
    section = ControllerSection(**out)
    if section.reference == "staircase" and not section.reference_levels:
        raise ConfigError("staircase reference needs reference_levels")
    if not section.zn_gain_min < section.zn_gain_max:
        raise ConfigError("zn_gain_min must be below zn_gain_max")
    return section


_SECTIONS = {
    "plant": _plant,
    "simulation": _simulation,
    "excitation": _excitation,
    "identification": _identification,
    "validation": _validation,
    "controller": _controller,
}


def parse_config(text: str, source: str = "") -> ExperimentConfig:
    parser = configparser.ConfigParser(
        inline_comment_prefixes=(";", "#"), interpolation=None, strict=True,
        default_section="__defaults__",
    )
    parser.optionxform = str  # keys are case-sensitive (Kp, Ts)
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc.message.splitlines()[0]}") from None
    values: dict = {"source": source}
    for name in parser.sections():
        items = dict(parser.items(name))
        if name == "output":
            _check_keys("output", items, ("directory", "seed"))
            if "directory" in items:
                if not items["directory"].strip():
                    raise ConfigError("[output] directory must not be empty")
                values["output_directory"] = items["directory"].strip()
            if "seed" in items:
                values["seed"] = _int(items["seed"], "seed")
        elif name in _SECTIONS:
            values[name] = _SECTIONS[name](items)
        else:
            raise ConfigError(f"unknown section [{name}]")
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
