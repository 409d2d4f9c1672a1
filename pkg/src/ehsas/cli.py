"""Command-line entry point.

Exit status: 0 success, 2 configuration, 3 data, 4 identifiability,
5 tuning, 6 divergence, 7 analysis error.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from . import io
from .config import (
    EXCITATION_KINDS,
    REFERENCE_KINDS,
    ExperimentConfig,
    load_config,
    parse_gains,
    parse_orders,
    parse_split,
    parse_validation_signals,
)
from .errors import ConfigError, EhsasError
from .pipelines import (
    identify,
    run_control,
    run_simulation,
    trajectory_dataset,
    validation_grid,
)


def _writable_dir(path: Path) -> Path:
    probe = path
    while not probe.exists():
        if probe.parent == probe:
            break
        probe = probe.parent
    if probe.exists() and (not probe.is_dir() or not os.access(probe, os.W_OK)):
        raise ConfigError(f"output directory {path} is not writable")
    return path


def _output_dir(args, config: ExperimentConfig) -> Path:
    return _writable_dir(Path(args.out or config.output_directory))


def _with_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    """Apply command-line overrides; every one is validated here."""
    changes = {}
    if getattr(args, "orders", None) or getattr(args, "split", None):
        config.require("identification")
        ident = config.identification
        if args.orders:
            ident = dataclasses.replace(ident, orders=parse_orders(args.orders),
                                        na_range=(), nb_range=(), nk_range=())
        if args.split:
            ident = dataclasses.replace(ident, split=parse_split(args.split))
        changes["identification"] = ident
    if getattr(args, "gains", None):
        config.require("controller")
        changes["controller"] = dataclasses.replace(config.controller,
                                                    gains=parse_gains(args.gains))
    signal = getattr(args, "signal", None)
    if signal:
        command = args.command
        if command in ("simulate", "identify"):
            config.require("excitation")
            if signal not in EXCITATION_KINDS:
                raise ConfigError(f"--signal: unknown excitation {signal!r}")
            changes["excitation"] = dataclasses.replace(config.excitation, signal=signal)
        elif command == "validate":
            config.require("validation")
            changes["validation"] = dataclasses.replace(
                config.validation, signals=parse_validation_signals(signal))
        else:
            config.require("controller")
            if signal not in REFERENCE_KINDS:
                raise ConfigError(f"--signal: unknown reference {signal!r}")
            controller = dataclasses.replace(config.controller, reference=signal)
            if signal == "staircase" and not controller.reference_levels:
                raise ConfigError("staircase reference needs reference_levels in [controller]")
            changes["controller"] = controller
    return dataclasses.replace(config, **changes)


def _identified(config: ExperimentConfig, args):
    """Model from ``--model`` or from the configured identification run."""
    if args.model:
        return io.read_model(args.model), None
    config.require("plant", "simulation", "excitation", "identification")
    traj = run_simulation(config.plant, config.simulation, config.excitation)
    result = identify(trajectory_dataset(traj, config.simulation.dt), config.identification)
    return result.model, result


def _fit_rows(result) -> list:
    rows = [("na", result.model.na), ("nb", result.model.nb), ("nk", result.model.nk)]
    rows.extend((k, v) for k, v in result.report.as_dict().items())
    return rows


def cmd_simulate(config: ExperimentConfig, args) -> dict:
    config.require("plant", "simulation", "excitation")
    out = _output_dir(args, config)
    traj = run_simulation(config.plant, config.simulation, config.excitation)
    return {out / "trajectory.csv": lambda p: io.write_trajectory(p, traj)}


def cmd_identify(config: ExperimentConfig, args) -> dict:
    config.require("identification")
    out = _output_dir(args, config)
    files = {}
    if args.data:
        data = io.read_dataset(args.data)
    else:
        config.require("plant", "simulation", "excitation")
        traj = run_simulation(config.plant, config.simulation, config.excitation)
        data = trajectory_dataset(traj, config.simulation.dt)
        files[out / "dataset.csv"] = lambda p: io.write_dataset(p, data)
    result = identify(data, config.identification)
    files[out / "model.txt"] = lambda p: io.write_model(p, result.model)
    files[out / "identify_report.csv"] = lambda p: io.write_report(
        p, _fit_rows(result), "Identification (free-run validation)")
    if result.candidates:
        def write_candidates(p):
            lines = ["na,nb,nk,best_fit_percent,fpe,error"]
            for c in result.candidates:
                na, nb, nk = c.orders
                if c.report is None:
                    lines.append(f"{na},{nb},{nk},,,{c.error.replace(',', ';')}")
                else:
                    lines.append(f"{na},{nb},{nk},{io.fmt(c.report.best_fit_percent)},"
                                 f"{io.fmt(c.report.fpe)},")
            p.write_text("\n".join(lines) + "\n")

        files[out / "order_search.csv"] = write_candidates
    return files


def cmd_validate(config: ExperimentConfig, args) -> dict:
    config.require("plant", "simulation", "validation")
    out = _output_dir(args, config)
    model, _ = _identified(config, args)
    cells = validation_grid(model, config.plant, config.validation, config.simulation)

    def write(p):
        lines = ["signal,amplitude,frequency,rmse"]
        lines.extend(f"{c.signal},{io.fmt(c.amplitude)},{io.fmt(c.frequency)},{io.fmt(c.rmse)}"
                     for c in cells)
        p.write_text("\n".join(lines) + "\n")

    return {out / "validation.csv": write}


def _control_table(result) -> str:
    lines = ["Transient response analysis", ""]
    if result.model_metrics is None:
        lines.append(f"{'Target':<18}{'tracking RMSE (m)':>20}")
        lines.append(f"{'Identified model':<18}{result.model_rmse:>20.6g}")
        lines.append(f"{'Nonlinear plant':<18}{result.plant_rmse:>20.6g}")
    else:
        lines.append(f"{'Target':<18}{'Tr (s)':>10}{'Ts (s)':>10}{'OS (%)':>10}")
        for name, m in (("Identified model", result.model_metrics),
                        ("Nonlinear plant", result.plant_metrics)):
            lines.append(f"{name:<18}{m.rise_time:>10.4g}{m.settling_time:>10.4g}"
                         f"{m.overshoot_percent:>10.4g}")
    c = result.controller
    lines += ["", f"Kp = {c.Kp:.6g}, Ki = {c.Ki:.6g}, Kd = {c.Kd:.6g}, "
                  f"k0 = {c.k0:g}, k1 = {c.k1:g}, k2 = {c.k2:g}"]
    if result.tuning is not None:
        lines.append(f"Ziegler-Nichols: Kcr = {result.tuning.Kcr:.6g}, "
                     f"Tcr = {result.tuning.Tcr:.6g} s")
    return "\n".join(lines) + "\n"


def cmd_control(config: ExperimentConfig, args) -> dict:
    config.require("plant", "simulation", "controller")
    out = _output_dir(args, config)
    model, _ = _identified(config, args)
    result = run_control(model, config.plant, config.controller, config.simulation)
    c = result.controller
    rows = [("Kp", c.Kp), ("Ki", c.Ki), ("Kd", c.Kd)]
    if result.tuning is not None:
        rows += [("Kcr", result.tuning.Kcr), ("Tcr", result.tuning.Tcr)]
    for prefix, metrics, err in (("model", result.model_metrics, result.model_rmse),
                                 ("plant", result.plant_metrics, result.plant_rmse)):
        if metrics is not None:
            rows += [(f"{prefix}.{k}", v) for k, v in metrics.as_dict().items()]
        rows.append((f"{prefix}.tracking_rmse", err))

    def write_report(p):
        io.write_report(p, rows)
        p.with_suffix(".txt").write_text(_control_table(result))

    return {
        out / "closed_loop_model.csv": lambda p: io.write_closed_loop(p, result.model_run),
        out / "closed_loop_plant.csv": lambda p: io.write_closed_loop(p, result.plant_run),
        out / "control_report.csv": write_report,
    }


COMMANDS = {
    "simulate": cmd_simulate,
    "identify": cmd_identify,
    "validate": cmd_validate,
    "control": cmd_control,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehsas",
        description="Electro-hydraulic servo actuator simulation, identification and control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "open-loop simulation of the nonlinear plant",
        "identify": "fit an ARX model to simulated or recorded data",
        "validate": "RMSE of an identified model against the plant on test signals",
        "control": "closed-loop NPID runs on the identified model and the plant",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", required=True, help="experiment INI file")
        p.add_argument("--out", help="artifact directory (overrides [output] directory)")
        p.add_argument("--signal", help="excitation, test-signal list or reference kind")
        if name in ("identify", "validate", "control"):
            p.add_argument("--orders", help="ARX orders 'na,nb,nk'")
            p.add_argument("--split", help="estimation fraction in (0, 1)")
        if name == "identify":
            p.add_argument("--data", help="dataset CSV (t,u,y) instead of simulating")
        if name in ("validate", "control"):
            p.add_argument("--model", help="model file from 'identify'")
        if name == "control":
            p.add_argument("--gains", help="'Kp,Ki,Kd' or 'auto-zn'")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _with_overrides(load_config(args.config), args)
        files = COMMANDS[args.command](config, args)
        for path in files:
            path.parent.mkdir(parents=True, exist_ok=True)
        for path, write in files.items():
            write(path)
    except EhsasError as exc:
        print(f"ehsas {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    for path in files:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
