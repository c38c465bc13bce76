"""Piecewise dc ramps, resonant ac drives and adiabaticity diagnostics."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import (
    CONSTANTS,
    DeviceParams,
    charge_detuning,
    flipflop_frequency,
    hyperfine_coupling,
    hyperfine_slope,
    orbital_splitting,
)

# absolute slack on time comparisons (s); schedules are built from sums of ns
TIME_TOL = 1e-18


@dataclass(frozen=True)
class RampSegment:
    t_start: float
    t_end: float
    de_start: float
    de_end: float
    shape: str = "linear"

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"segment must have t_end > t_start, got {self}")
        if self.shape != "linear":
            raise ValueError(f"unsupported ramp shape {self.shape!r}")

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def slope(self) -> float:
        """Field sweep rate in V/m/s."""
        return (self.de_end - self.de_start) / self.duration

    @property
    def is_static(self) -> bool:
        return self.de_end == self.de_start

    def value(self, t):
        return self.de_start + self.slope * (np.asarray(t, float) - self.t_start)


@dataclass(frozen=True)
class AcDrive:
    """Rectangular window of Eac cos(omega t + phase); t is schedule time."""

    amplitude: float
    omega: float
    phase: float
    t_on: float
    t_off: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("drive amplitude must be non-negative")
        if not self.t_off > self.t_on:
            raise ValueError("drive window must have t_off > t_on")

    def value(self, t):
        t = np.asarray(t, float)
        on = (t >= self.t_on - TIME_TOL) & (t <= self.t_off + TIME_TOL)
        return np.where(on, self.amplitude * np.cos(self.omega * t + self.phase), 0.0)


@dataclass(frozen=True)
class PulseSchedule:
    dc_segments: tuple[RampSegment, ...]
    ac_drives: tuple[AcDrive, ...] = ()
    total_time: float = field(default=None)

    def __post_init__(self):
        segs = tuple(self.dc_segments)
        object.__setattr__(self, "dc_segments", segs)
        object.__setattr__(self, "ac_drives", tuple(self.ac_drives))
        if not segs:
            raise ValueError("schedule needs at least one dc segment")
        if abs(segs[0].t_start) > TIME_TOL:
            raise ValueError("schedule must start at t = 0")
        for a, b in zip(segs, segs[1:]):
            if abs(a.t_end - b.t_start) > 1e-9 * a.t_end + TIME_TOL:
                raise ValueError(f"dc segments not contiguous at t = {a.t_end}")
            if a.de_end != b.de_start:
                raise ValueError(f"dc field jumps at t = {a.t_end}")
        if self.total_time is None:
            object.__setattr__(self, "total_time", segs[-1].t_end)
        elif abs(self.total_time - segs[-1].t_end) > 1e-9 * self.total_time:
            raise ValueError("total_time does not match the last dc segment")
        for drive in self.ac_drives:
            if drive.t_on < -TIME_TOL or drive.t_off > self.total_time * (1 + 1e-12):
                raise ValueError("ac drive window outside the schedule")

    @property
    def boundaries(self) -> np.ndarray:
        """Sorted times where the Hamiltonian changes form."""
        times = [0.0, self.total_time]
        times += [s.t_end for s in self.dc_segments[:-1]]
        for drive in self.ac_drives:
            times += [drive.t_on, drive.t_off]
        times = np.unique(np.array(times))
        # merge boundaries that only differ by float noise
        keep = np.concatenate([[True], np.diff(times) > 1e-12 * self.total_time])
        return times[keep]

    def _check_times(self, t):
        t = np.asarray(t, float)
        if np.any(t < -TIME_TOL) or np.any(t > self.total_time * (1 + 1e-12) + TIME_TOL):
            raise ValueError(f"time outside schedule [0, {self.total_time}]")
        return t

    def _segment_index(self, t):
        ends = np.array([s.t_end for s in self.dc_segments[:-1]])
        return np.searchsorted(ends, t, side="left")

    def dc_field(self, t):
        t = self._check_times(t)
        idx = self._segment_index(t)
        start = np.array([s.t_start for s in self.dc_segments])[idx]
        de0 = np.array([s.de_start for s in self.dc_segments])[idx]
        slope = np.array([s.slope for s in self.dc_segments])[idx]
        return de0 + slope * (t - start)

    def dc_slope(self, t):
        t = self._check_times(t)
        return np.array([s.slope for s in self.dc_segments])[self._segment_index(t)]

    def ac_field(self, t):
        t = self._check_times(t)
        out = np.zeros_like(t)
        for drive in self.ac_drives:
            out = out + drive.value(t)
        return out

    def to_dict(self) -> dict:
        return {
            "dc_segments": [dataclasses.asdict(seg) for seg in self.dc_segments],
            "ac_drives": [dataclasses.asdict(d) for d in self.ac_drives],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PulseSchedule":
        unknown = set(data) - {"dc_segments", "ac_drives"}
        if unknown:
            raise ValueError(f"unknown schedule keys: {sorted(unknown)}")
        segs = [RampSegment(**{k: _num(k, v) for k, v in seg.items()}) for seg in data["dc_segments"]]
        drives = [AcDrive(**{k: float(v) for k, v in d.items()}) for d in data.get("ac_drives") or []]
        return cls(tuple(segs), tuple(drives))

    def is_static_between(self, t0: float, t1: float) -> bool:
        """True when the dc field is constant and no drive acts on (t0, t1)."""
        mid = 0.5 * (t0 + t1)
        if self.dc_slope(mid) != 0.0:
            return False
        return not any(
            d.amplitude > 0 and d.t_on < t1 and d.t_off > t0 for d in self.ac_drives
        )


def _num(key, value):
    return value if key == "shape" else float(value)


def evaluate_schedule(s: PulseSchedule, t: float) -> tuple[float, float]:
    """(dc field offset, instantaneous ac field) at time t, both in V/m."""
    return float(s.dc_field(t)), float(s.ac_field(t))


def ramp_segments(
    de_idle: float,
    de_int: float,
    de_ct: float,
    tau1: float,
    tau2: float,
    dwell: float,
    t0: float = 0.0,
) -> list[RampSegment]:
    """Idle -> intermediate -> operating point, dwell, and the mirrored return."""
    points = [
        (tau1, de_idle, de_int),
        (tau2, de_int, de_ct),
        (dwell, de_ct, de_ct),
        (tau2, de_ct, de_int),
        (tau1, de_int, de_idle),
    ]
    segments = []
    t = t0
    for duration, a, b in points:
        segments.append(RampSegment(t, t + duration, a, b))
        t += duration
    return segments


def idle_segment(de_idle: float, t0: float, duration: float) -> RampSegment:
    return RampSegment(t0, t0 + duration, de_idle, de_idle)


def concatenate(*parts: Sequence[RampSegment]) -> list[RampSegment]:
    """Join segment lists end to start, re-timing each part."""
    out: list[RampSegment] = []
    t = 0.0
    for part in parts:
        offset = t - part[0].t_start
        for seg in part:
            out.append(
                RampSegment(seg.t_start + offset, seg.t_end + offset, seg.de_start, seg.de_end)
            )
        t = out[-1].t_end
    return out


# --- adiabaticity -----------------------------------------------------------


def adiabatic_factor(delta, omega, d_delta_dt, d_omega_dt):
    """|ω_eff / β'| for H = Δσz + Ωσx with β = arctan(Ω/Δ).

    Returns ``inf`` where the mixing angle is stationary.
    """
    delta, omega, dd, do = np.broadcast_arrays(
        *(np.asarray(x, float) for x in (delta, omega, d_delta_dt, d_omega_dt))
    )
    norm2 = delta**2 + omega**2
    if np.any(norm2 == 0):
        raise ValueError("adiabatic factor undefined for Δ = Ω = 0")
    beta_dot = (delta * do - omega * dd) / norm2
    with np.errstate(divide="ignore"):
        k = np.where(beta_dot == 0, np.inf, np.sqrt(norm2) / np.abs(beta_dot))
    return k if k.ndim else float(k)


@dataclass(frozen=True)
class AdiabaticityReport:
    K_c: float
    K_so: float
    K_E: float
    t_c: float
    t_so: float
    t_E: float

    @property
    def K(self) -> float:
        return min(self.K_c, self.K_so)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["K"] = self.K
        return d

    @staticmethod
    def combine(reports: Sequence["AdiabaticityReport"]) -> "AdiabaticityReport":
        """Worst case over several qubits' schedules."""
        best = {}
        for name, tname in (("K_c", "t_c"), ("K_so", "t_so"), ("K_E", "t_E")):
            r = min(reports, key=lambda rep: getattr(rep, name))
            best[name] = getattr(r, name)
            best[tname] = getattr(r, tname)
        return AdiabaticityReport(**best)


def _charge_terms(de, rate, params):
    c = np.pi * CONSTANTS.e * params.d / CONSTANTS.h
    delta = c * de
    omega = np.full_like(de, np.pi * params.Vt)
    return delta, omega, c * rate, np.zeros_like(de)


def _spin_orbit_terms(de, rate, params):
    eps = orbital_splitting(de, params)
    eps_slope = charge_detuning(de, params) * charge_detuning(1.0, params) / eps
    a = hyperfine_coupling(de, params)
    a_slope = hyperfine_slope(de, params)
    eff = flipflop_frequency(de, params)
    eff_slope = a * a_slope / eff
    g_so = a * params.Vt / (4 * eps)
    g_slope = params.Vt / 4 * (a_slope / eps - a * eps_slope / eps**2)
    return (
        np.pi * (eps - eff),
        2 * np.pi * g_so,
        np.pi * (eps_slope - eff_slope) * rate,
        2 * np.pi * g_slope * rate,
    )


def _drive_terms(de, rate, amplitude, omega_drive, params):
    eps = orbital_splitting(de, params)
    eps_slope = charge_detuning(de, params) * charge_detuning(1.0, params) / eps
    g_e = CONSTANTS.e * params.d * amplitude / (4 * CONSTANTS.h) * params.Vt / eps
    g_slope = -g_e * eps_slope / eps
    return (
        np.pi * (omega_drive / (2 * np.pi) - eps),
        2 * np.pi * g_e,
        -np.pi * eps_slope * rate,
        2 * np.pi * g_slope * rate,
    )


def _sample_times(t0, t1, per_ns, minimum):
    n = max(minimum, int(np.ceil((t1 - t0) * per_ns * 1e9)) + 1)
    return np.linspace(t0, t1, n)


def report_adiabaticity(
    s: PulseSchedule,
    params: DeviceParams,
    samples_per_ns: float = 10.0,
    min_samples: int = 200,
) -> AdiabaticityReport:
    """Minimum adiabatic factors of the charge, spin-orbit and drive systems.

    Each dc segment is sampled on its own closed interval with its own sweep
    rate, so the one-sided rates at ramp corners are respected. A drive with
    a rectangular envelope switches infinitely fast, which gives K_E = 0 at
    its first edge.
    """
    mins = {"c": (np.inf, 0.0), "so": (np.inf, 0.0), "E": (np.inf, 0.0)}

    def update(key, values, times):
        i = int(np.argmin(values))
        if values[i] < mins[key][0]:
            mins[key] = (float(values[i]), float(times[i]))

    for seg in s.dc_segments:
        if seg.is_static:
            continue
        times = _sample_times(seg.t_start, seg.t_end, samples_per_ns, min_samples)
        de = seg.value(times)
        rate = np.full_like(de, seg.slope)
        update("c", adiabatic_factor(*_charge_terms(de, rate, params)), times)
        update("so", adiabatic_factor(*_spin_orbit_terms(de, rate, params)), times)

    for drive in s.ac_drives:
        if drive.amplitude == 0:
            continue
        mins["E"] = min(mins["E"], (0.0, float(drive.t_on)))
        times = _sample_times(drive.t_on, drive.t_off, samples_per_ns, min_samples)
        de = s.dc_field(times)
        rate = s.dc_slope(times)
        k = adiabatic_factor(*_drive_terms(de, rate, drive.amplitude, drive.omega, params))
        update("E", k, times)

    return AdiabaticityReport(
        K_c=mins["c"][0],
        K_so=mins["so"][0],
        K_E=mins["E"][0],
        t_c=mins["c"][1],
        t_so=mins["so"][1],
        t_E=mins["E"][1],
    )
