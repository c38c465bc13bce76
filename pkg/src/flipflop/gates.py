"""The gate set {Rz(-π/2), H, √iSWAP}: schedules, fidelity and noise sweeps."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .model import CouplingGeometry, DeviceParams, flipflop_frequency, qubit_frequency
from .noise import NoiseSpec, NoiseTrace, generate_noise, write_csv
from .propagator import (
    DEFAULT_DT,
    FrameSpec,
    Propagation,
    propagate,
    to_rotating_frame,
)
from .pulses import (
    AcDrive,
    AdiabaticityReport,
    PulseSchedule,
    concatenate,
    idle_segment,
    ramp_segments,
    report_adiabaticity,
)

KINDS = ("rz_minus_half_pi", "hadamard", "sqrt_iswap", "custom")

NS = 1e-9
DE_IDLE = 1e4
DE_INT = 500.0

RZ_VT = 11.29e9
RZ_DE_CT = 290.0
RZ_TAU = (1.7 * NS, 3.5 * NS)
RZ_DWELL = 21.6 * NS

H_VT = 11.5e9
H_DWELL = 41.5 * NS
H_DRIVE = 180.0
H_DRIVE_ON = 40 * NS
H_PHASE = -np.pi / 2

SW_VT = 11.58e9
SW_TAU = (1.7 * NS, 99 * NS)
SW_DWELL = 2 * NS
SW_ROT_TAU = (1.7 * NS, 3.5 * NS)
SW_ROT_DWELL = 1.2 * NS

RZ_IDEAL = np.diag([np.exp(1j * np.pi / 4), np.exp(-1j * np.pi / 4)])
H_IDEAL = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
SQRT_ISWAP_IDEAL = np.array(
    [
        [1, 0, 0, 0],
        [0, 1 / np.sqrt(2), 1j / np.sqrt(2), 0],
        [0, 1j / np.sqrt(2), 1 / np.sqrt(2), 0],
        [0, 0, 0, 1],
    ]
)


@dataclass(frozen=True)
class GateSpec:
    kind: str
    schedules: tuple[PulseSchedule, ...]
    ideal: np.ndarray = field(repr=False)
    frame: FrameSpec
    params: DeviceParams
    geometry: CouplingGeometry | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "schedules", tuple(self.schedules))
        ideal = np.asarray(self.ideal, dtype=complex)
        dim = 2 ** len(self.schedules)
        if ideal.shape != (dim, dim):
            raise ValueError(f"ideal must be {dim}x{dim} for {len(self.schedules)} qubit(s)")
        if np.abs(ideal.conj().T @ ideal - np.eye(dim)).max() > 1e-12:
            raise ValueError("ideal gate is not unitary")
        object.__setattr__(self, "ideal", ideal)
        if (self.geometry is None) != (len(self.schedules) == 1):
            raise ValueError("a geometry is required exactly for two-qubit gates")

    @property
    def n_qubits(self) -> int:
        return len(self.schedules)

    @property
    def total_time(self) -> float:
        return self.schedules[0].total_time


@dataclass
class GateResult:
    logical_op: np.ndarray
    fidelity: float
    leakage: float
    adiabaticity: AdiabaticityReport
    r: float | None = None
    propagation: Propagation | None = field(default=None, repr=False)

    def metadata(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "leakage": self.leakage,
            "adiabaticity": self.adiabaticity.to_dict(),
            "r_m": self.r,
        }


@dataclass(frozen=True)
class SweepResult:
    alphas: np.ndarray
    mean_infidelity: np.ndarray
    stderr: np.ndarray
    n_realizations: int
    seed: int
    infidelities: np.ndarray = field(repr=False)  # (n_alphas, n_realizations)

    def to_csv(self, path) -> None:
        n = np.full(len(self.alphas), self.n_realizations)
        write_csv(
            path,
            ["alpha_V_per_m", "mean_infidelity", "stderr", "n"],
            [self.alphas, self.mean_infidelity, self.stderr, n],
        )


def idle_frame(params: DeviceParams, de_idle: float = DE_IDLE) -> FrameSpec:
    """Frame rotating at the dressed frequency of a qubit idling at de_idle."""
    return FrameSpec("rotating", qubit_frequency(de_idle, params))


def build_rz_gate(params: DeviceParams | None = None) -> GateSpec:
    """Rz(-π/2) by a dwell near the charge-qubit anticrossing."""
    params = params if params is not None else DeviceParams(Vt=RZ_VT)
    segs = ramp_segments(DE_IDLE, DE_INT, RZ_DE_CT, *RZ_TAU, RZ_DWELL)
    return GateSpec("rz_minus_half_pi", (PulseSchedule(segs),), RZ_IDEAL, idle_frame(params), params)


def build_hadamard_gate(params: DeviceParams | None = None) -> GateSpec:
    """H by a resonant electric drive at the anticrossing, centred in the dwell."""
    params = params if params is not None else DeviceParams(Vt=H_VT)
    segs = ramp_segments(DE_IDLE, DE_INT, 0.0, *RZ_TAU, H_DWELL)
    t_on = sum(RZ_TAU) + 0.5 * (H_DWELL - H_DRIVE_ON)
    omega = 2 * np.pi * float(flipflop_frequency(0.0, params))
    drive = AcDrive(H_DRIVE, omega, H_PHASE, t_on, t_on + H_DRIVE_ON)
    return GateSpec("hadamard", (PulseSchedule(segs, (drive,)),), H_IDEAL, idle_frame(params), params)


def _sqrt_iswap_schedules():
    stage1 = ramp_segments(DE_IDLE, DE_INT, 0.0, *SW_TAU, SW_DWELL)
    rot = ramp_segments(DE_IDLE, DE_INT, 0.0, *SW_ROT_TAU, SW_ROT_DWELL)
    rest = [idle_segment(DE_IDLE, 0.0, rot[-1].t_end)]
    q1 = concatenate(stage1, rot, rest)
    q2 = concatenate(stage1, rest, rot)
    return PulseSchedule(q1), PulseSchedule(q2)


def stage1_schedules() -> tuple[PulseSchedule, PulseSchedule]:
    """Joint ramp of both qubits to the anticrossing where they interact."""
    s = PulseSchedule(ramp_segments(DE_IDLE, DE_INT, 0.0, *SW_TAU, SW_DWELL))
    return s, s


def build_sqrt_iswap_gate(
    params: DeviceParams | None = None, geom: CouplingGeometry | None = None
) -> GateSpec:
    """√iSWAP: joint interaction stage, then a z-rotation on each qubit in turn."""
    if geom is None:
        raise ValueError("√iSWAP needs a CouplingGeometry (see calibrate_distance)")
    params = params if params is not None else DeviceParams(Vt=SW_VT)
    return GateSpec(
        "sqrt_iswap", _sqrt_iswap_schedules(), SQRT_ISWAP_IDEAL, idle_frame(params), params, geom
    )


# --- fidelity ---------------------------------------------------------------


def extract_logical(prop: Propagation, frame: FrameSpec) -> np.ndarray:
    """Logical block of the frame-transformed unitary, without renormalization."""
    return to_rotating_frame(prop, frame).logical_block()


def entanglement_fidelity(disturbed, ideal) -> float:
    """|tr(ideal† · disturbed) / d|², the fidelity with a maximally entangled probe."""
    disturbed = np.asarray(disturbed)
    ideal = np.asarray(ideal)
    if disturbed.shape != ideal.shape or disturbed.shape[0] != disturbed.shape[1]:
        raise ValueError(f"dimension mismatch: {disturbed.shape} vs {ideal.shape}")
    d = len(ideal)
    f = abs(np.trace(ideal.conj().T @ disturbed) / d) ** 2
    return float(min(max(f, 0.0), 1.0))


def leakage_of(op) -> float:
    """Average population lost from the logical subspace, 1 - tr(L†L)/d."""
    op = np.asarray(op)
    return float(max(0.0, 1.0 - np.vdot(op, op).real / len(op)))


def gate_adiabaticity(gate: GateSpec) -> AdiabaticityReport:
    return AdiabaticityReport.combine([report_adiabaticity(s, gate.params) for s in gate.schedules])


def simulate_gate(
    gate: GateSpec,
    noise=None,
    dt: float = DEFAULT_DT,
    initial_state=None,
    record_every: int = 1,
    sectors: str = "all",
    adiabaticity: AdiabaticityReport | None = None,
) -> GateResult:
    """Propagate a gate once; the returned propagation is in the laboratory frame."""
    prop = propagate(
        list(gate.schedules),
        gate.params,
        geometry=gate.geometry,
        noise=noise,
        dt=dt,
        initial_state=initial_state,
        record_every=record_every,
        sectors=sectors,
    )
    op = extract_logical(prop, gate.frame)
    return GateResult(
        logical_op=op,
        fidelity=entanglement_fidelity(op, gate.ideal),
        leakage=leakage_of(op),
        adiabaticity=adiabaticity if adiabaticity is not None else gate_adiabaticity(gate),
        r=gate.geometry.r if gate.geometry is not None else None,
        propagation=prop,
    )


# --- noise sweeps -----------------------------------------------------------


def realization_seed(base_seed: int, realization: int, qubit: int) -> int:
    """Seed of one unit-amplitude trace; the same trace is reused at every alpha."""
    return int(np.random.SeedSequence([base_seed, realization, qubit]).generate_state(1)[0])


def noise_samples_for(total_time: float, noise_dt: float) -> int:
    n = int(np.ceil(total_time / noise_dt)) + 2
    return n + n % 2


def _infidelities_for_realization(args):
    gate, alphas, base_seed, realization, dt, noise_dt, shared = args
    n = noise_samples_for(gate.total_time, noise_dt)
    units = [
        generate_noise(NoiseSpec(1.0, n, noise_dt, realization_seed(base_seed, realization, q)))
        for q in range(1 if shared else gate.n_qubits)
    ]
    units = units * (gate.n_qubits // len(units))
    out = []
    for alpha in alphas:
        traces = [u.scaled(alpha) for u in units]
        prop = propagate(
            list(gate.schedules), gate.params, gate.geometry, traces, dt=dt, sectors="logical"
        )
        out.append(1.0 - entanglement_fidelity(extract_logical(prop, gate.frame), gate.ideal))
    return out


def default_workers() -> int:
    return max(1, int(os.environ.get("FLIPFLOP_WORKERS", "1")))


def sweep_noise(
    gate: GateSpec,
    alphas,
    n_realizations: int = 100,
    base_seed: int = 0,
    dt: float = DEFAULT_DT,
    noise_dt: float = 10e-12,
    workers: int | None = None,
    shared_noise: bool = False,
) -> SweepResult:
    """Mean entanglement infidelity and its standard error at each alpha.

    Realization i uses the same unit trace at every alpha (common random
    numbers), so the curve is smooth in alpha. Two qubits see independent
    traces unless ``shared_noise``. Results do not depend on ``workers``.
    """
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")
    alphas = np.asarray(alphas, dtype=float)
    if np.any(alphas < 0):
        raise ValueError("alphas must be non-negative")
    workers = default_workers() if workers is None else workers
    tasks = [(gate, alphas, base_seed, i, dt, noise_dt, shared_noise) for i in range(n_realizations)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_infidelities_for_realization, tasks))
    else:
        rows = [_infidelities_for_realization(t) for t in tasks]
    inf = np.clip(np.array(rows).T, 0.0, 1.0)  # (n_alphas, n_realizations)
    mean = inf.mean(axis=1)
    err = inf.std(axis=1, ddof=1) / np.sqrt(n_realizations) if n_realizations > 1 else np.zeros(len(alphas))
    return SweepResult(alphas, mean, err, n_realizations, base_seed, inf)


def default_alpha_grid(lo: float = 1.0, hi: float = 1000.0, count: int = 16) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), count)


# --- distance calibration ---------------------------------------------------


@dataclass(frozen=True)
class Calibration:
    geometry: CouplingGeometry
    swap_amplitude: float
    fidelity: float


def stage1_swap_amplitude(r: float, params: DeviceParams, dt: float = DEFAULT_DT, eps_r: float = 11.7) -> float:
    """Normalized |01> <-> |10> amplitude after the interaction stage alone.

    It is insensitive to single-qubit phases, so it measures only the
    entangling angle: 1/√2 for a half swap.
    """
    prop = propagate(
        list(stage1_schedules()), params, CouplingGeometry(r, eps_r), dt=dt, sectors="logical"
    )
    block = prop.logical_block()
    return float(abs(block[1, 2]) / np.hypot(abs(block[1, 1]), abs(block[1, 2])))


def calibrate_distance(
    params: DeviceParams | None = None,
    r_range: tuple[float, float] = (100e-9, 400e-9),
    n_scan: int = 16,
    dt: float = DEFAULT_DT,
    eps_r: float = 11.7,
    xtol: float = 1e-12,
) -> Calibration:
    """Largest inter-qubit distance at which the interaction stage is a half swap.

    Scans r downward from r_range[1] for the first crossing of the target
    amplitude, refines it by root finding, then reports the noiseless
    fidelity of the whole gate at that distance.
    """
    params = params if params is not None else DeviceParams(Vt=SW_VT)
    target = 1 / np.sqrt(2)

    def excess(r):
        return stage1_swap_amplitude(r, params, dt, eps_r) - target

    rs = np.linspace(r_range[1], r_range[0], n_scan)
    prev_r, prev = rs[0], excess(rs[0])
    for r in rs[1:]:
        cur = excess(r)
        if np.sign(cur) != np.sign(prev):
            r_cal = optimize.brentq(excess, r, prev_r, xtol=xtol)
            geom = CouplingGeometry(r_cal, eps_r)
            res = simulate_gate(build_sqrt_iswap_gate(params, geom), dt=dt, sectors="logical")
            return Calibration(geom, excess(r_cal) + target, res.fidelity)
        prev_r, prev = r, cur
    raise ValueError(f"no distance in {r_range} m gives a half swap")
