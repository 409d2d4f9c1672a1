"""Experiment pipelines shared by the command-line commands.

Each pipeline computes all of its results in memory; writing files is left
to the caller so that a failure never leaves partial artifacts behind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import (
    ControllerSection,
    ExcitationSection,
    IdentificationSection,
    SimulationSection,
    ValidationSection,
)
from .control import ClosedLoopResult, NpidConfig, ZnResult, auto_tune, simulate_closed_loop
from .metrics import FitReport, TransientMetrics, rmse, transient_metrics
from .plant import (
    PlantParams,
    PlantState,
    Trajectory,
    bandwidth,
    operating_point_tf,
    simulate_trajectory,
)
from .signals import (
    ChirpSpec,
    MultisineSpec,
    TestSignalSpec,
    chirp,
    excitation_band,
    multisine,
    multisine_frequencies,
    test_signal,
)
from .sysid import (
    ArxModel,
    Candidate,
    Dataset,
    SplitSpec,
    arx_fit,
    arx_simulate,
    order_search,
    resample,
    resample_dataset,
    split_dataset,
    validate,
)
from .timeseries import TimeSeries


def excitation_bandwidth(section: ExcitationSection, params: PlantParams) -> float:
    if section.bandwidth is not None:
        return section.bandwidth
    return bandwidth(operating_point_tf(params))


def build_excitation(section: ExcitationSection, sim: SimulationSection,
                     params: PlantParams) -> TimeSeries:
    kind, amp = section.signal, section.amplitude
    if kind == "zero":
        n = int(math.floor(sim.duration / sim.dt + 1e-9)) + 1
        return TimeSeries(0.0, sim.dt, np.zeros(n))
    if kind == "chirp":
        lo, hi = excitation_band(excitation_bandwidth(section, params))
        spec = ChirpSpec(amp, lo / (2 * math.pi), hi / (2 * math.pi), sim.duration, sim.dt,
                         section.phase)
        return chirp(spec)
    if kind == "multisine":
        freqs = multisine_frequencies(excitation_bandwidth(section, params))
        return multisine(MultisineSpec(amp, tuple(freqs), sim.duration, sim.dt))
    return test_signal(TestSignalSpec(kind, amp, sim.duration, sim.dt, section.frequency,
                                      section.levels))


def initial_state(params: PlantParams, sim: SimulationSection) -> PlantState:
    return PlantState.at_rest(params, sim.initial_position)


def run_simulation(params: PlantParams, sim: SimulationSection,
                   excitation: ExcitationSection) -> Trajectory:
    u = build_excitation(excitation, sim, params)
    return simulate_trajectory(u, initial_state(params, sim), params)


def trajectory_dataset(traj: Trajectory, dt: float) -> Dataset:
    """Input and absolute piston position as an identification dataset."""
    return Dataset(TimeSeries(0.0, dt, traj.u), TimeSeries(0.0, dt, traj.xp))


@dataclass(frozen=True)
class IdentificationResult:
    model: ArxModel
    report: FitReport
    estimation: Dataset
    validation: Dataset
    candidates: tuple[Candidate, ...] = ()


def identify(data: Dataset, section: IdentificationSection) -> IdentificationResult:
    """Resample, split, fit and free-run validate."""
    resampled = resample_dataset(data, section.sample_period)
    split = SplitSpec(section.split)
    if section.orders is None:
        candidates = tuple(order_search(resampled, section.na_range, section.nb_range,
                                        section.nk_range, split, section.detrend))
        best = candidates[0]
        estimation, validation = split_dataset(resampled, split)
        return IdentificationResult(best.model, best.report, estimation, validation, candidates)
    estimation, validation = split_dataset(resampled, split, section.orders)
    model = arx_fit(estimation, *section.orders, detrend=section.detrend)
    return IdentificationResult(model, validate(model, estimation, validation),
                                estimation, validation)


# --- validation grid -------------------------------------------------------


@dataclass(frozen=True)
class GridCell:
    signal: str
    amplitude: float
    frequency: float
    rmse: float


def _displacement(target, u: TimeSeries, ts: float, start: PlantState | None) -> TimeSeries:
    """Output displacement of ``target`` driven from rest, sampled at ``ts``."""
    if isinstance(target, ArxModel):
        return arx_simulate(target, resample(u, ts))
    traj = simulate_trajectory(u, start, target)
    y = TimeSeries(0.0, u.dt, traj.xp - traj.xp[0])
    return resample(y, ts)


def validation_grid(model: ArxModel, reference, section: ValidationSection,
                    sim: SimulationSection) -> list[GridCell]:
    """RMSE between ``reference`` (plant parameters or another model) and
    ``model`` for every test signal, amplitude and frequency.

    Rows are ordered by signal as configured, then amplitude, then
    frequency. Inputs are generated at the simulation step and averaged down
    to the model period; outputs are displacements from rest.
    """
    start = None
    if isinstance(reference, PlantParams):
        start = initial_state(reference, sim)
        dt = sim.dt
    else:
        dt = model.Ts
    cells = []
    for kind in section.signals:
        for amp in section.amplitudes:
            for freq in section.frequencies:
                u = test_signal(TestSignalSpec(kind, amp, section.duration, dt, freq))
                y_ref = _displacement(reference, u, model.Ts, start)
                y_mod = _displacement(model, u, model.Ts, None)
                cells.append(GridCell(kind, amp, freq, rmse(y_ref, y_mod)))
    return cells


# --- control ---------------------------------------------------------------


def controller_config(section: ControllerSection, gains) -> NpidConfig:
    kp, ki, kd = gains
    return NpidConfig(kp, ki, kd, section.k0, section.k1, section.k2, section.u_min,
                      section.u_max, section.derivative_filter_tau, section.anti_windup)


def build_reference(section: ControllerSection, dt: float) -> TimeSeries:
    kind = section.reference
    if kind == "staircase":
        peak = max(abs(v) for _, v in section.reference_levels)
        spec = TestSignalSpec("staircase", max(peak, 1e-300), section.duration, dt,
                              staircase_levels=section.reference_levels)
    else:
        spec = TestSignalSpec(kind, section.reference_amplitude, section.duration, dt,
                              section.reference_frequency)
    return test_signal(spec)


@dataclass(frozen=True)
class ControlResult:
    controller: NpidConfig
    tuning: ZnResult | None
    model_run: ClosedLoopResult
    plant_run: ClosedLoopResult
    model_metrics: TransientMetrics | None
    plant_metrics: TransientMetrics | None
    model_rmse: float
    plant_rmse: float


def run_control(model: ArxModel, params: PlantParams, section: ControllerSection,
                sim: SimulationSection) -> ControlResult:
    """Same controller on the identified model and on the nonlinear plant.

    Gains of ``None`` mean Ziegler-Nichols tuning on the identified model.
    """
    chosen = section.gains
    tuning = None
    if chosen is None:
        tuning = auto_tune(model, model.Ts, section.zn_gain_min, section.zn_gain_max)
        chosen = (tuning.Kp, tuning.Ki, tuning.Kd)
    controller = controller_config(section, chosen)
    reference = build_reference(section, model.Ts)
    model_run = simulate_closed_loop(model, controller, reference)
    plant_run = simulate_closed_loop(params, controller, reference,
                                     initial=initial_state(params, sim))
    model_metrics = plant_metrics = None
    if section.reference == "step":
        level = section.reference_amplitude
        model_metrics = transient_metrics(model_run.position, level)
        plant_metrics = transient_metrics(plant_run.position, level)
    return ControlResult(
        controller, tuning, model_run, plant_run, model_metrics, plant_metrics,
        rmse(reference, model_run.position), rmse(reference, plant_run.position),
    )
