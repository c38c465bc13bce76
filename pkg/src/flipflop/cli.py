"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .gates import (
    GateSpec,
    build_hadamard_gate,
    build_rz_gate,
    build_sqrt_iswap_gate,
    calibrate_distance,
    idle_frame,
    noise_samples_for,
    simulate_gate,
    sweep_noise,
)
from .io import (
    ConfigError,
    ExperimentConfig,
    RunManifest,
    load_config,
    matrix_record,
    start_run,
    write_json,
)
from .model import LOGICAL, CouplingGeometry
from .noise import NoiseSpec, central_band, ensemble_psd, generate_noise, loglog_slope, write_csv
from .pulses import PulseSchedule
from .propagator import NumericalError, bloch_trajectory, to_rotating_frame

log = logging.getLogger("flipflop")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

_SINGLE_STATES = {
    "0": np.array([1, 0]),
    "1": np.array([0, 1]),
    "+x": np.array([1, 1]) / np.sqrt(2),
    "-x": np.array([1, -1]) / np.sqrt(2),
    "+y": np.array([1, 1j]) / np.sqrt(2),
    "-y": np.array([1, -1j]) / np.sqrt(2),
}


def logical_state(labels: list[str]) -> np.ndarray:
    """Full-space state from per-qubit labels such as ["+x"] or ["1", "0"]."""
    vecs = []
    for label in labels:
        if label not in _SINGLE_STATES:
            raise ConfigError(f"unknown initial state {label!r}; use one of {sorted(_SINGLE_STATES)}")
        v = np.zeros(8, dtype=complex)
        v[list(LOGICAL)] = _SINGLE_STATES[label]
        vecs.append(v)
    out = vecs[0]
    for v in vecs[1:]:
        out = np.kron(out, v)
    return out


def custom_gate(config: ExperimentConfig, params) -> GateSpec:
    try:
        schedule = PulseSchedule.from_dict(config.gate.schedule)
        ideal = np.asarray(config.gate.ideal["real"], float) + 1j * np.asarray(
            config.gate.ideal.get("imag", 0.0), float
        )
        return GateSpec("custom", (schedule,), ideal, idle_frame(params, schedule.dc_field(0.0)), params)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid custom gate: {exc}") from exc


def build_gate(config: ExperimentConfig, calibrate: bool = True) -> tuple[GateSpec, dict]:
    params = config.device_params()
    kind = config.gate.canonical_kind
    if kind == "rz_minus_half_pi":
        return build_rz_gate(params), {}
    if kind == "hadamard":
        return build_hadamard_gate(params), {}
    if kind == "custom":
        return custom_gate(config, params), {}
    info = {}
    if config.gate.r is not None:
        geom = CouplingGeometry(config.gate.r, config.gate.eps_r)
    elif calibrate:
        log.info("no distance given; calibrating")
        cal = calibrate_distance(params, dt=config.gate.dt, eps_r=config.gate.eps_r)
        geom = cal.geometry
        info = {"calibrated_r_m": geom.r, "swap_amplitude": cal.swap_amplitude}
    else:
        raise ConfigError("gate.r is required")
    return build_sqrt_iswap_gate(params, geom), info


def cmd_simulate_gate(config: ExperimentConfig, out: Path, manifest: RunManifest) -> None:
    gate, info = build_gate(config)
    labels = config.initial_labels()
    if len(labels) != gate.n_qubits:
        raise ConfigError(f"{gate.kind} needs {gate.n_qubits} initial-state label(s)")
    noise = None
    if config.noise.alpha:
        n = max(config.noise.n_samples, noise_samples_for(gate.total_time, config.noise.dt))
        n += n % 2
        noise = [
            generate_noise(NoiseSpec(config.noise.alpha, n, config.noise.dt, config.seed + q))
            for q in range(gate.n_qubits)
        ]
    res = simulate_gate(
        gate,
        noise=noise,
        dt=config.gate.dt,
        initial_state=logical_state(labels),
        record_every=config.gate.record_every,
        sectors="logical" if gate.n_qubits == 2 else "all",
    )
    prop = res.propagation
    rotating = to_rotating_frame(prop, gate.frame)
    for name, p in (("trajectory_lab.csv", prop), ("trajectory_rotating.csv", rotating)):
        header, cols = ["t_s"], [p.times]
        for q in range(gate.n_qubits):
            b = bloch_trajectory(p, q)
            sfx = "" if gate.n_qubits == 1 else f"_{q + 1}"
            header += [f"{c}{sfx}" for c in ("x", "y", "z", "leakage")]
            cols += [b[:, 1], b[:, 2], b[:, 3], b[:, 4]]
        write_csv(out / name, header, cols)
        manifest.add_output(out / name)
    obs = prop.observables()
    write_csv(out / "observables.csv", ["t_s", *obs], [prop.times, *obs.values()])
    manifest.add_output(out / "observables.csv")
    meta = {
        "gate": gate.kind,
        "initial_state": labels,
        "frame": {"frame": gate.frame.frame, "rotation_frequency_Hz": gate.frame.rotation_frequency},
        "trajectory_frames": {"trajectory_lab.csv": "laboratory", "trajectory_rotating.csv": "rotating"},
        "noise_alpha_V_per_m": config.noise.alpha or 0.0,
        "total_time_s": gate.total_time,
        "logical_op": matrix_record(res.logical_op),
        **res.metadata(),
        **info,
    }
    write_json(out / "gate_result.json", meta)
    manifest.add_output(out / "gate_result.json")
    manifest.results.update({"fidelity": res.fidelity, "leakage": res.leakage, **info})


def cmd_sweep_noise(config: ExperimentConfig, out: Path, manifest: RunManifest) -> None:
    gate, info = build_gate(config)
    sweep = sweep_noise(
        gate,
        config.alpha_grid(),
        n_realizations=config.sweep.n_realizations,
        base_seed=config.seed,
        dt=config.gate.dt,
        noise_dt=config.noise.dt,
        shared_noise=config.sweep.shared_noise,
    )
    sweep.to_csv(out / "sweep.csv")
    manifest.add_output(out / "sweep.csv")
    manifest.results.update({"gate": gate.kind, **info})


def cmd_noise_psd(config: ExperimentConfig, out: Path, manifest: RunManifest) -> None:
    nc = config.noise
    alpha = 1.0 if nc.alpha is None else nc.alpha
    if alpha == 0:
        raise ConfigError("noise.alpha is 0: the PSD is identically zero and has no slope")
    if nc.n_samples % 2:
        raise ConfigError("noise.n_samples must be even")
    spec = NoiseSpec(alpha, nc.n_samples, nc.dt, config.seed)
    freqs, psd = ensemble_psd(spec, config.psd.n_seeds, config.psd.n_segments)
    band = central_band(freqs, config.psd.decades)
    slope = loglog_slope(freqs, psd, band)
    write_csv(out / "psd.csv", ["freq_Hz", "psd"], [freqs, psd])
    manifest.add_output(out / "psd.csv")
    manifest.results.update({"loglog_slope": slope, "fit_band_Hz": list(band)})


def cmd_calibrate_distance(config: ExperimentConfig, out: Path, manifest: RunManifest) -> None:
    cal = calibrate_distance(config.device_params("sqrt_iswap"), dt=config.gate.dt, eps_r=config.gate.eps_r)
    record = {
        "r_m": cal.geometry.r,
        "eps_r": cal.geometry.eps_r,
        "swap_amplitude": cal.swap_amplitude,
        "fidelity": cal.fidelity,
    }
    write_json(out / "calibration.json", record)
    manifest.add_output(out / "calibration.json")
    manifest.results.update(record)


COMMANDS = {
    "simulate-gate": cmd_simulate_gate,
    "sweep-noise": cmd_sweep_noise,
    "noise-psd": cmd_noise_psd,
    "calibrate-distance": cmd_calibrate_distance,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flipflop", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="YAML experiment configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--realizations", type=int, help="noise realizations per alpha")
        p.add_argument("--dt", type=float, help="propagation step in seconds")
        p.add_argument("--gate", help="gate selector (rz, hadamard, sqrt_iswap)")
    return parser


def resolve_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    data = config.to_dict()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["output"] = str(args.out)
    if args.realizations is not None:
        data["sweep"]["n_realizations"] = args.realizations
    if args.dt is not None:
        data["gate"]["dt"] = args.dt
    if args.gate is not None:
        data["gate"]["kind"] = args.gate
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = resolve_config(args)
        out = start_run(config.output)
        manifest = RunManifest(command=args.command, config=config.to_dict())
        t0 = time.perf_counter()
        COMMANDS[args.command](config, out, manifest)
        manifest.timings["wall_s"] = time.perf_counter() - t0
        manifest.write(out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
