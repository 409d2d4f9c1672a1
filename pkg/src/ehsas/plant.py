"""Nonlinear electro-hydraulic servo actuator model.

A critically lapped servo valve feeds a symmetric double-acting cylinder
driving a mass load. The state is ``(xp, vp, p1, p2)``: piston position
measured from the retracted end (``0 <= xp <= stroke``), velocity and the two
chamber pressures. Integration is classical RK4 with the input held constant
over each step.

Flow sign convention: ``q1`` is the flow *into* chamber 1 and ``q2`` the flow
*out of* chamber 2, so both are positive for a positive spool opening.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import NamedTuple

import numpy as np

from .errors import AnalysisError, ConfigError, DivergenceError, InputError
from .timeseries import TimeSeries
from .units import INCH, PSI

MAX_STEP = 1e-3


@dataclass(frozen=True)
class PlantParams:
    """Physical constants of the actuator, all SI.

    Defaults describe a 12.5 in2 bore, 60 in stroke industrial actuator with
    a two-stage servo valve. ``supply_pressure``,
    ``return_pressure`` and ``fluid_density`` are assumptions (typical for this
    actuator class), and ``flow_pressure_coeff`` / ``total_leakage_coeff`` are
    placeholders: no published values exist for them.
    ``specific_heat_ratio`` is carried for completeness and unused.
    """

    supply_pressure: float = 20.68e6
    return_pressure: float = 0.1e6
    servo_valve_gain: float = 2.2e-6
    max_opening: float = 0.0178
    discharge_coeff: float = 0.6
    leakage_area: float = 1e-12
    valve_area: float = 0.0002318
    fluid_density: float = 850.0
    piston_area: float = 12.5 * INCH**2
    piston_stroke: float = 60 * INCH
    dead_volume: float = 0.0003048
    bulk_modulus: float = 22e4 * PSI
    load_mass: float = 500.0
    spring_stiffness: float = 20.0
    damping_coeff: float = 100.0
    coulomb_friction: float = 450.0
    viscous_friction: float = 64.0
    contact_stiffness: float = 6.14e8
    contact_damping: float = 200.0
    flow_gain_coeff: float = 1.8e-6
    flow_pressure_coeff: float = 0.0
    total_leakage_coeff: float = 1e-13
    actuator_gain: float = 491.04e-12
    specific_heat_ratio: float = 1.4
    input_limit: float = 10.0
    friction_smoothing_velocity: float = 1e-3

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(f"{f.name} must be a finite number, got {value!r}")
        if not self.supply_pressure > self.return_pressure >= 0:
            raise ConfigError("need supply_pressure > return_pressure >= 0")
        positive = (
            "valve_area", "piston_area", "dead_volume", "load_mass",
            "fluid_density", "bulk_modulus", "max_opening", "piston_stroke",
            "input_limit", "friction_smoothing_velocity", "servo_valve_gain",
            "contact_stiffness",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        nonnegative = (
            "leakage_area", "spring_stiffness", "damping_coeff", "coulomb_friction",
            "viscous_friction", "contact_damping", "flow_pressure_coeff",
            "total_leakage_coeff",
        )
        for name in nonnegative:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 0 < self.discharge_coeff <= 1:
            raise ConfigError("discharge_coeff must lie in (0, 1]")

    @property
    def total_volume(self) -> float:
        return self.dead_volume + self.piston_area * self.piston_stroke

    @property
    def orifice_gain(self) -> float:
        """K1 = K2 = Cf * (As / Om) * sqrt(2 / rho)."""
        return (
            self.discharge_coeff
            * (self.valve_area / self.max_opening)
            * math.sqrt(2.0 / self.fluid_density)
        )

    @property
    def max_hydraulic_force(self) -> float:
        return (self.supply_pressure - self.return_pressure) * self.piston_area

    def replace(self, **changes) -> PlantParams:
        return replace(self, **changes)


@dataclass(frozen=True)
class PlantState:
    xp: float
    vp: float
    p1: float
    p2: float

    @classmethod
    def at_rest(cls, params: PlantParams, position: float | None = None) -> PlantState:
        """Pressure-balanced state at rest, mid-stroke unless ``position`` given."""
        if position is None:
            position = 0.5 * params.piston_stroke
        p_mid = 0.5 * (params.supply_pressure + params.return_pressure)
        return cls(float(position), 0.0, p_mid, p_mid)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.xp, self.vp, self.p1, self.p2)


class OrificeFlows(NamedTuple):
    q1: float
    q2: float
    leak: float  # chamber 1 -> chamber 2


class StateRate(NamedTuple):
    dxp: float
    dvp: float
    dp1: float
    dp2: float


def valve_displacement(u: float, params: PlantParams) -> float:
    """Spool displacement for command ``u`` (volts), saturated at the input
    limit and at the maximum opening."""
    if not math.isfinite(u):
        raise InputError(f"valve command must be finite, got {u!r}")
    lim = params.input_limit
    xv = params.servo_valve_gain * min(max(u, -lim), lim)
    om = params.max_opening
    return min(max(xv, -om), om)


def orifice_flows(xv: float, p1: float, p2: float, params: PlantParams) -> OrificeFlows:
    for name, value in (("xv", xv), ("p1", p1), ("p2", p2)):
        if not math.isfinite(value):
            raise InputError(f"{name} must be finite, got {value!r}")
    ps, pr = params.supply_pressure, params.return_pressure
    k = params.orifice_gain
    if xv >= 0:
        q1 = k * xv * math.sqrt(max(ps - p1, 0.0))
        q2 = k * xv * math.sqrt(max(p2 - pr, 0.0))
    else:
        q1 = k * xv * math.sqrt(max(p1 - pr, 0.0))
        q2 = k * xv * math.sqrt(max(ps - p2, 0.0))
    dp = p1 - p2
    kl = params.discharge_coeff * params.leakage_area * math.sqrt(2.0 / params.fluid_density)
    leak = math.copysign(kl * math.sqrt(abs(dp)), dp) if dp != 0 else 0.0
    return OrificeFlows(q1, q2, leak)


def friction_force(vp: float, params: PlantParams) -> float:
    return (
        params.coulomb_friction * math.tanh(vp / params.friction_smoothing_velocity)
        + params.viscous_friction * vp
    )


def contact_force(xp: float, vp: float, params: PlantParams) -> float:
    """One-sided end-stop spring-damper. Same sign convention as the other
    load forces: it enters the force balance with a minus sign, so it is
    negative below the retracted end and positive beyond full extension."""
    if xp < 0.0:
        return min(params.contact_stiffness * xp + params.contact_damping * vp, 0.0)
    excess = xp - params.piston_stroke
    if excess > 0.0:
        return max(params.contact_stiffness * excess + params.contact_damping * vp, 0.0)
    return 0.0


def _rhs(params: PlantParams):
    """Right-hand side specialised on ``params``: f(xp, vp, p1, p2, xv)."""
    ps, pr = params.supply_pressure, params.return_pressure
    k = params.orifice_gain
    kl = params.discharge_coeff * params.leakage_area * math.sqrt(2.0 / params.fluid_density)
    ap, vd, xs = params.piston_area, params.dead_volume, params.piston_stroke
    beta, m = params.bulk_modulus, params.load_mass
    ks, bs = params.spring_stiffness, params.damping_coeff
    a1, a2, veps = params.coulomb_friction, params.viscous_friction, params.friction_smoothing_velocity
    cs, cd = params.contact_stiffness, params.contact_damping
    x_mid = 0.5 * xs
    sqrt, tanh = math.sqrt, math.tanh

    def f(xp, vp, p1, p2, xv):
        if xv >= 0.0:
            q1 = k * xv * sqrt(ps - p1 if p1 < ps else 0.0)
            q2 = k * xv * sqrt(p2 - pr if p2 > pr else 0.0)
        else:
            q1 = k * xv * sqrt(p1 - pr if p1 > pr else 0.0)
            q2 = k * xv * sqrt(ps - p2 if p2 < ps else 0.0)
        dp = p1 - p2
        if dp > 0.0:
            leak = kl * sqrt(dp)
        elif dp < 0.0:
            leak = -kl * sqrt(-dp)
        else:
            leak = 0.0

        if xp < 0.0:
            fc = cs * xp + cd * vp
            fc = fc if fc < 0.0 else 0.0
        elif xp > xs:
            fc = cs * (xp - xs) + cd * vp
            fc = fc if fc > 0.0 else 0.0
        else:
            fc = 0.0

        v1 = vd + ap * xp
        v2 = vd + ap * (xs - xp)
        if not (v1 > 0.0 and v2 > 0.0):
            if not math.isfinite(xp):
                # diverged state: let the caller's finiteness check report it
                return (math.nan,) * 4
            raise ConfigError(
                f"degenerate chamber volume (V1={v1:.3g}, V2={v2:.3g}) at xp={xp:.6g}"
            )
        force = ap * dp - (a1 * tanh(vp / veps) + a2 * vp) - ks * (xp - x_mid) - bs * vp - fc
        return (
            vp,
            force / m,
            beta / v1 * (q1 - leak - ap * vp),
            beta / v2 * (ap * vp + leak - q2),
        )

    return f


def plant_derivatives(state: PlantState, u: float, params: PlantParams) -> StateRate:
    """Time derivative of the state under valve command ``u`` (volts).

    Force balance: ``M a = Ap (p1 - p2) - F_friction - Ks (xp - stroke/2)
    - Bs vp - F_contact`` with tanh-smoothed Coulomb friction; the spring
    acts about mid-stroke.
    """
    xv = valve_displacement(u, params)
    return StateRate(*_rhs(params)(state.xp, state.vp, state.p1, state.p2, xv))


def _check_step(dt: float):
    if not (math.isfinite(dt) and 0 < dt <= MAX_STEP * (1 + 1e-12)):
        raise ConfigError(f"integration step must lie in (0, {MAX_STEP}] s, got {dt!r}")


def _rk4_stepper(params: PlantParams):
    f = _rhs(params)
    ps, pr = params.supply_pressure, params.return_pressure

    def step(x, v, p1, p2, xv, h):
        k1 = f(x, v, p1, p2, xv)
        h2 = 0.5 * h
        k2 = f(x + h2 * k1[0], v + h2 * k1[1], p1 + h2 * k1[2], p2 + h2 * k1[3], xv)
        k3 = f(x + h2 * k2[0], v + h2 * k2[1], p1 + h2 * k2[2], p2 + h2 * k2[3], xv)
        k4 = f(x + h * k3[0], v + h * k3[1], p1 + h * k3[2], p2 + h * k3[3], xv)
        h6 = h / 6.0
        x = x + h6 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        v = v + h6 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        p1 = p1 + h6 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        p2 = p2 + h6 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        # NaN fails both comparisons and is left for the caller to detect
        p1 = ps if p1 > ps else (pr if p1 < pr else p1)
        p2 = ps if p2 > ps else (pr if p2 < pr else p2)
        return x, v, p1, p2

    return step


def _finite(*values) -> bool:
    return all(math.isfinite(v) for v in values)


def step_rk4(state: PlantState, u: float, dt: float, params: PlantParams,
             index: int = 0) -> PlantState:
    """One RK4 step with zero-order-hold input; pressures are clamped to
    ``[return_pressure, supply_pressure]`` afterwards."""
    _check_step(dt)
    xv = valve_displacement(u, params)
    new = _rk4_stepper(params)(*state.as_tuple(), xv, dt)
    if not _finite(*new):
        raise DivergenceError(f"plant state became non-finite at step {index}", index)
    return PlantState(*new)


@dataclass(frozen=True)
class Trajectory:
    """Full open-loop record: input and state at each sample instant."""

    t: np.ndarray
    u: np.ndarray
    xp: np.ndarray
    vp: np.ndarray
    p1: np.ndarray
    p2: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0


def simulate_trajectory(input: TimeSeries, initial: PlantState, params: PlantParams,
                        substeps: int = 1) -> Trajectory:
    """Drive the plant with ``input`` held constant over each sample period.

    Sample ``k`` of the result is the state at ``t0 + k*dt``, before the
    ``k``-th input value acts; sample 0 is ``initial``.
    """
    if int(substeps) != substeps or substeps < 1:
        raise ConfigError(f"substeps must be a positive integer, got {substeps!r}")
    substeps = int(substeps)
    h = input.dt / substeps
    _check_step(h)
    step = _rk4_stepper(params)
    n = len(input)
    out = np.empty((n, 4))
    x, v, p1, p2 = initial.as_tuple()
    if not _finite(x, v, p1, p2):
        raise InputError("initial state must be finite")
    u_values = input.samples
    for k in range(n):
        out[k] = (x, v, p1, p2)
        if k == n - 1:
            break
        xv = valve_displacement(float(u_values[k]), params)
        for _ in range(substeps):
            x, v, p1, p2 = step(x, v, p1, p2, xv, h)
        if not _finite(x, v, p1, p2):
            raise DivergenceError(f"plant simulation diverged at sample {k + 1}", k + 1)
    return Trajectory(input.times, u_values.copy(), out[:, 0], out[:, 1], out[:, 2], out[:, 3])


def simulate_open_loop(input: TimeSeries, initial: PlantState, params: PlantParams,
                       substeps: int = 1) -> TimeSeries:
    """Piston position sampled at the input's period."""
    traj = simulate_trajectory(input, initial, params, substeps)
    return TimeSeries(input.t0, input.dt, traj.xp)


class PlantRunner:
    """Sample-by-sample driver used by closed-loop simulation.

    ``y`` is the displacement from the initial position.
    """

    def __init__(self, params: PlantParams, dt: float, initial: PlantState | None = None):
        self.params = params
        self.substeps = max(1, math.ceil(dt / MAX_STEP - 1e-9))
        self.h = dt / self.substeps
        self._step = _rk4_stepper(params)
        self.state = (initial or PlantState.at_rest(params)).as_tuple()
        self.origin = self.state[0]
        self.index = 0

    @property
    def y(self) -> float:
        return self.state[0] - self.origin

    def advance(self, u: float):
        xv = valve_displacement(u, self.params)
        s = self.state
        for _ in range(self.substeps):
            s = self._step(*s, xv, self.h)
        self.index += 1
        if not _finite(*s):
            raise DivergenceError(f"plant diverged at sample {self.index}", self.index)
        self.state = s


# --- linear models ---------------------------------------------------------


@dataclass(frozen=True)
class LinearTf:
    """Continuous transfer function, coefficients in descending powers of s."""

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __post_init__(self):
        num = tuple(float(c) for c in np.atleast_1d(self.num))
        den = tuple(float(c) for c in np.atleast_1d(self.den))
        if not den or den[0] == 0:
            raise ConfigError("denominator leading coefficient must be nonzero")
        if not num:
            raise ConfigError("numerator must have at least one coefficient")
        if not all(math.isfinite(c) for c in num + den):
            raise ConfigError("transfer function coefficients must be finite")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __call__(self, s):
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def freqresp(self, w) -> np.ndarray:
        return self(1j * np.asarray(w, dtype=float))

    def scaled(self, gain: float) -> LinearTf:
        return LinearTf(tuple(gain * c for c in self.num), self.den)


@dataclass(frozen=True)
class ActuatorConstants:
    gain: float  # Ka = Kq Kv / Ap
    natural_frequency: float  # wa
    damping: float  # zeta_a
    tabulated_gain: float

    @property
    def gain_discrepancy(self) -> float:
        """Relative difference between derived and tabulated actuator gain."""
        return (self.gain - self.tabulated_gain) / self.tabulated_gain


def actuator_constants(params: PlantParams) -> ActuatorConstants:
    vt = params.total_volume
    m = params.load_mass
    if vt <= 0 or m <= 0:
        raise ConfigError("total volume and load mass must be positive")
    ap, beta = params.piston_area, params.bulk_modulus
    ka = params.flow_gain_coeff * params.servo_valve_gain / ap
    wa = ap * math.sqrt(4.0 * beta / (vt * m))
    za = math.sqrt(4.0 * beta / vt * (params.flow_pressure_coeff + params.total_leakage_coeff)) / (2.0 * ap)
    return ActuatorConstants(ka, wa, za, params.actuator_gain)


def linearized_tf(params: PlantParams) -> LinearTf:
    """``wa*Ka / (s^3 + 2*za*wa*s^2 + wa*s)`` with the published constants.

    The form is kept exactly as published even though it is dimensionally
    odd (``wa`` where ``wa**2`` is conventional). For a model that matches
    the nonlinear plant use :func:`operating_point_tf`.
    """
    c = actuator_constants(params)
    wa = c.natural_frequency
    return LinearTf((wa * c.gain,), (1.0, 2.0 * c.damping * wa, wa, 0.0))


def operating_point_tf(params: PlantParams, position: float | None = None) -> LinearTf:
    """Small-signal model of the nonlinear plant around the pressure-balanced
    rest state, in consistent units (m per V).

    Flow gain comes from the orifice law at null, friction is linearised at
    zero velocity and the chamber compliance uses the actual volumes at
    ``position`` (mid-stroke by default). ``Kc + Ctp`` from ``params`` act as
    a linear cross-port leakage.
    """
    if position is None:
        position = 0.5 * params.piston_stroke
    ap, beta, m = params.piston_area, params.bulk_modulus, params.load_mass
    v1 = params.dead_volume + ap * position
    v2 = params.dead_volume + ap * (params.piston_stroke - position)
    if v1 <= 0 or v2 <= 0:
        raise ConfigError("operating point gives a non-positive chamber volume")
    compliance = 1.0 / (beta * (1.0 / v1 + 1.0 / v2))
    kq = params.orifice_gain * math.sqrt(0.5 * (params.supply_pressure - params.return_pressure))
    kce = params.flow_pressure_coeff + params.total_leakage_coeff
    b = (
        params.damping_coeff
        + params.viscous_friction
        + params.coulomb_friction / params.friction_smoothing_velocity
    )
    ks = params.spring_stiffness
    num = (ap * kq * params.servo_valve_gain,)
    den = (
        compliance * m,
        compliance * b + kce * m,
        compliance * ks + kce * b + ap * ap,
        kce * ks,
    )
    lead = den[0]
    return LinearTf(tuple(c / lead for c in num), tuple(c / lead for c in den))


def bandwidth(tf: LinearTf, w_min: float = 1e-3, w_max: float = 1e5,
              points_per_decade: int = 100) -> float:
    """-3 dB bandwidth of the unity-feedback loop ``T = G / (1 + G)``.

    The reference level is ``|T(0)|`` (1 for a loop with an integrator).
    """
    closed_den = np.polyadd(tf.den, tf.num)

    def mag(w):
        return np.abs(np.polyval(tf.num, 1j * w) / np.polyval(closed_den, 1j * w))

    den0 = closed_den[-1]
    if den0 != 0:
        ref = abs(tf.num[-1] / den0) if len(tf.num) else 0.0
    else:
        ref = float(mag(w_min))
    if not ref > 0:
        raise AnalysisError("closed loop has zero low-frequency gain")
    level = ref / math.sqrt(2.0)

    decades = math.log10(w_max / w_min)
    grid = np.logspace(math.log10(w_min), math.log10(w_max), int(decades * points_per_decade) + 1)
    below = np.flatnonzero(mag(grid) < level)
    if below.size == 0:
        raise AnalysisError(
            f"no -3 dB crossing of the closed loop in [{w_min:g}, {w_max:g}] rad/s"
        )
    i = int(below[0])
    if i == 0:
        raise AnalysisError(f"closed-loop gain already below -3 dB at {w_min:g} rad/s")
    lo, hi = math.log(grid[i - 1]), math.log(grid[i])
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mag(math.exp(mid)) < level:
            hi = mid
        else:
            lo = mid
    return math.exp(0.5 * (lo + hi))
