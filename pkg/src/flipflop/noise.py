"""1/f charge-noise traces and their spectral check."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal


@dataclass(frozen=True)
class NoiseSpec:
    """Parameters of one 1/f trace.

    ``t0`` is the time unit of the spectral density alpha / (omega t0); it
    defaults to the sample spacing.
    """

    alpha: float
    n_samples: int = 2**16
    dt: float = 1e-11
    seed: int = 0
    t0: float | None = None

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"noise amplitude must be >= 0, got {self.alpha!r}")
        if self.n_samples < 2 or self.n_samples % 2:
            raise ValueError(f"n_samples must be even and >= 2, got {self.n_samples!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t0 is None:
            object.__setattr__(self, "t0", self.dt)

    @property
    def duration(self) -> float:
        return self.n_samples * self.dt


@dataclass(frozen=True)
class NoiseTrace:
    samples: np.ndarray = field(repr=False)
    spec: NoiseSpec

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.spec.n_samples) * self.spec.dt

    def sample(self, t) -> np.ndarray:
        """Sample-and-hold value at times t (s)."""
        idx = np.floor(np.asarray(t, float) / self.spec.dt + 1e-9).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.spec.n_samples):
            raise ValueError(
                f"noise trace covers [0, {self.spec.duration:g}) s only"
            )
        return self.samples[idx]

    def scaled(self, alpha: float) -> "NoiseTrace":
        """Same realization at a different amplitude."""
        spec = NoiseSpec(alpha, self.spec.n_samples, self.spec.dt, self.spec.seed, self.spec.t0)
        if self.spec.alpha == 0:
            return generate_noise(spec)
        return NoiseTrace(self.samples * (alpha / self.spec.alpha), spec)

    def to_csv(self, path) -> None:
        write_csv(path, ["time_s", "value_V_per_m"], [self.times, self.samples])


def _unit_spectrum(spec: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    n_bins = spec.n_samples // 2
    k = np.arange(1, n_bins + 1)
    omega = 2 * np.pi * k / (spec.n_samples * spec.dt)
    gauss = (rng.standard_normal(n_bins) + 1j * rng.standard_normal(n_bins)) / np.sqrt(2)
    phase = rng.uniform(0.0, 2 * np.pi, n_bins)
    amp = np.abs(gauss) / np.sqrt(omega * spec.t0)
    spectrum = np.zeros(n_bins + 1, dtype=complex)
    spectrum[1:] = amp * np.exp(1j * phase)
    # the Nyquist bin of a real signal is real
    spectrum[-1] = spectrum[-1].real
    return spectrum


def generate_noise(spec: NoiseSpec) -> NoiseTrace:
    """1/f trace: random magnitudes shaped by omega^-1/2 with uniform phases.

    The DC bin is zero, conjugate symmetry is implied by the real inverse
    transform (orthonormal scaling), and the result is scaled by alpha.
    Generation is a pure function of ``spec``.
    """
    rng = np.random.default_rng(spec.seed)
    spectrum = _unit_spectrum(spec, rng)
    unit = np.fft.irfft(spectrum, n=spec.n_samples, norm="ortho")
    return NoiseTrace(spec.alpha * unit, spec)


def estimate_psd(trace, n_segments: int = 1, dt: float | None = None):
    """Averaged periodogram of non-overlapping boxcar segments.

    Returns one-sided (frequencies in Hz, PSD in units²/Hz) without the DC
    bin. ``trace`` may be a NoiseTrace or a plain array with ``dt`` given.
    """
    if isinstance(trace, NoiseTrace):
        x, dt = trace.samples, trace.spec.dt
    else:
        if dt is None:
            raise ValueError("dt is required for a plain sample array")
        x = np.asarray(trace, float)
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    nperseg = len(x) // n_segments
    if nperseg < 4:
        raise ValueError(
            f"trace of {len(x)} samples is too short for {n_segments} segments"
        )
    freqs, psd = signal.welch(
        x[: nperseg * n_segments],
        fs=1.0 / dt,
        window="boxcar",
        nperseg=nperseg,
        noverlap=0,
        detrend="constant",
        scaling="density",
    )
    return freqs[1:], psd[1:]


def central_band(freqs, decades: float = 2.0) -> tuple[float, float]:
    """Band of the given width centred (in log frequency) on the axis."""
    lo, hi = np.log10(freqs[0]), np.log10(freqs[-1])
    if hi - lo < decades:
        raise ValueError("frequency axis spans fewer decades than requested")
    mid = 0.5 * (lo + hi)
    return 10 ** (mid - decades / 2), 10 ** (mid + decades / 2)


def loglog_slope(freqs, psd, band: tuple[float, float] | None = None) -> float:
    """Least-squares slope of log10(psd) against log10(freq) inside band."""
    freqs = np.asarray(freqs, float)
    psd = np.asarray(psd, float)
    if band is None:
        band = central_band(freqs)
    mask = (freqs >= band[0]) & (freqs <= band[1]) & (psd > 0)
    if mask.sum() < 3:
        raise ValueError("not enough positive PSD points in the fit band")
    slope, _ = np.polyfit(np.log10(freqs[mask]), np.log10(psd[mask]), 1)
    return float(slope)


def ensemble_psd(spec: NoiseSpec, n_seeds: int, n_segments: int = 1):
    """PSD averaged over seeds spec.seed, spec.seed + 1, ..."""
    total = None
    for i in range(n_seeds):
        trace = generate_noise(NoiseSpec(spec.alpha, spec.n_samples, spec.dt, spec.seed + i, spec.t0))
        freqs, psd = estimate_psd(trace, n_segments)
        total = psd if total is None else total + psd
    return freqs, total / n_seeds


def write_csv(path, header, columns) -> None:
    """Bit-stable CSV: 17 significant digits, header row, Unix newlines."""
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.16e}"
