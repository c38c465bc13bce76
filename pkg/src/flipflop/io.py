"""Experiment configuration, run manifests and output files."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import platform
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .model import DeviceParams

MANIFEST_NAME = "manifest.json"

GATE_ALIASES = {
    "rz": "rz_minus_half_pi",
    "rz_minus_half_pi": "rz_minus_half_pi",
    "hadamard": "hadamard",
    "h": "hadamard",
    "sqrt_iswap": "sqrt_iswap",
    "custom": "custom",
}

DEFAULT_INITIAL = {
    "rz_minus_half_pi": ["+x"],
    "hadamard": ["0"],
    "sqrt_iswap": ["1", "0"],
    "custom": ["0"],
}


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass
class GateConfig:
    kind: str = "rz"
    initial_state: list | None = None
    r: float | None = None
    eps_r: float = 11.7
    dt: float = 1e-12
    record_every: int = 10
    # custom single-qubit gates: a PulseSchedule mapping and {real, imag} target
    schedule: dict | None = None
    ideal: dict | None = None

    @property
    def canonical_kind(self) -> str:
        return GATE_ALIASES[self.kind]


@dataclass
class NoiseConfig:
    # None: noiseless gate runs, and unit amplitude for the PSD check
    alpha: float | None = None
    n_samples: int = 2**16
    dt: float = 1e-11


@dataclass
class SweepConfig:
    alpha_min: float = 1.0
    alpha_max: float = 1000.0
    count: int = 16
    n_realizations: int = 100
    allow_outside_range: bool = False
    shared_noise: bool = False


@dataclass
class PsdConfig:
    n_seeds: int = 50
    n_segments: int = 1
    decades: float = 2.0


@dataclass
class ExperimentConfig:
    device: dict = field(default_factory=dict)
    gate: GateConfig = field(default_factory=GateConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    psd: PsdConfig = field(default_factory=PsdConfig)
    output: str = "out"
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.gate.kind not in GATE_ALIASES:
            raise ConfigError(
                f"gate.kind {self.gate.kind!r} is not one of {sorted(GATE_ALIASES)}"
            )
        unknown = set(self.device) - {f.name for f in dataclasses.fields(DeviceParams)}
        if unknown:
            raise ConfigError(f"unknown device keys: {sorted(unknown)}")
        if self.gate.canonical_kind == "custom" and (self.gate.schedule is None or self.gate.ideal is None):
            raise ConfigError("gate.kind custom needs gate.schedule and gate.ideal")
        if not self.gate.dt > 0:
            raise ConfigError("gate.dt must be positive")
        if self.gate.record_every < 1:
            raise ConfigError("gate.record_every must be >= 1")
        if self.gate.r is not None and not self.gate.r > 0:
            raise ConfigError("gate.r must be positive")
        if (self.noise.alpha is not None and self.noise.alpha < 0) or not self.noise.dt > 0 or self.noise.n_samples < 2:
            raise ConfigError("noise needs alpha >= 0, dt > 0 and n_samples >= 2")
        s = self.sweep
        if not 0 < s.alpha_min <= s.alpha_max or s.count < 1 or s.n_realizations < 1:
            raise ConfigError("sweep needs 0 < alpha_min <= alpha_max, count >= 1, n_realizations >= 1")
        if not s.allow_outside_range and (s.alpha_min < 1 or s.alpha_max > 1000):
            raise ConfigError("alpha grid outside [1, 1000] V/m; set sweep.allow_outside_range")
        if self.psd.n_seeds < 1 or self.psd.n_segments < 1 or not self.psd.decades > 0:
            raise ConfigError("psd needs n_seeds >= 1, n_segments >= 1, decades > 0")

    def device_params(self, kind: str | None = None) -> DeviceParams:
        """Device for a gate (default: the selected one), with its table Vt unless overridden."""
        from .gates import H_VT, RZ_VT, SW_VT

        vt = {"rz_minus_half_pi": RZ_VT, "hadamard": H_VT, "sqrt_iswap": SW_VT}
        kind = kind or self.gate.canonical_kind
        base = {"Vt": vt[kind]} if kind in vt else {}
        try:
            return DeviceParams(**{**base, **self.device})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid device: {exc}") from exc

    def initial_labels(self) -> list[str]:
        labels = self.gate.initial_state or DEFAULT_INITIAL[self.gate.canonical_kind]
        return [str(x) for x in (labels if isinstance(labels, list) else [labels])]

    def alpha_grid(self) -> np.ndarray:
        s = self.sweep
        return np.logspace(np.log10(s.alpha_min), np.log10(s.alpha_max), s.count)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data) -> "ExperimentConfig":
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping")
        sections = {"gate": GateConfig, "noise": NoiseConfig, "sweep": SweepConfig, "psd": PsdConfig}
        top = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - top
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in data.items():
            if key in sections:
                kwargs[key] = _section(sections[key], key, value)
            elif key == "device":
                if value is not None and not isinstance(value, dict):
                    raise ConfigError("device must be a mapping")
                kwargs[key] = {k: _number(v, f"device.{k}") if not isinstance(v, bool) else v
                               for k, v in (value or {}).items()}
            else:
                kwargs[key] = value
        if not isinstance(kwargs.get("seed", 0), int):
            raise ConfigError("seed must be an integer")
        return cls(**kwargs)


def _section(kind, name, value):
    if value is None:
        return kind()
    if not isinstance(value, dict):
        raise ConfigError(f"{name} must be a mapping")
    known = {f.name: f for f in dataclasses.fields(kind)}
    unknown = set(value) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {sorted(unknown)}")
    out = {}
    for key, v in value.items():
        default = known[key].default
        if isinstance(default, bool):
            if not isinstance(v, bool):
                raise ConfigError(f"{name}.{key} must be true or false")
        elif isinstance(default, (int, float)) or (key in ("r", "alpha") and v is not None):
            v = _number(v, f"{name}.{key}")
            if isinstance(default, int):
                if v != int(v):
                    raise ConfigError(f"{name}.{key} must be an integer")
                v = int(v)
        elif isinstance(default, str) and not isinstance(v, str):
            raise ConfigError(f"{name}.{key} must be a string")
        out[key] = v
    return kind(**out)


def _number(v, name) -> float:
    # YAML 1.1 reads exponent forms such as 1e-12 as strings
    if isinstance(v, bool):
        raise ConfigError(f"{name} must be a number")
    try:
        v = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {v!r}") from None
    if not np.isfinite(v):
        raise ConfigError(f"{name} must be finite")
    return v


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    try:
        return ExperimentConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)


# --- manifests ---------------------------------------------------------------


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def versions() -> dict:
    return {
        "flipflop": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
    }


@dataclass
class RunManifest:
    command: str
    config: dict
    outputs: dict = field(default_factory=dict)  # file name -> sha256
    timings: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    versions: dict = field(default_factory=versions)

    def add_output(self, path) -> None:
        self.outputs[Path(path).name] = sha256_of(path)

    def write(self, out_dir) -> Path:
        """Write atomically; the manifest marks a run's outputs as final."""
        out_dir = Path(out_dir)
        target = out_dir / MANIFEST_NAME
        fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=".manifest-", suffix=".json")
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(_finite(dataclasses.asdict(self)), fh, indent=2, sort_keys=True,
                      default=_jsonable, allow_nan=False)
            fh.write("\n")
        os.replace(tmp, target)
        return target


def start_run(out_dir) -> Path:
    """Create the output directory and drop any manifest of a previous run."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stale = out_dir / MANIFEST_NAME
    if stale.exists():
        stale.unlink()
    return out_dir


def write_json(path, data) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_finite(data), fh, indent=2, sort_keys=True, default=_jsonable, allow_nan=False)
        fh.write("\n")


def _finite(obj):
    """Replace inf and nan by None so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not np.isfinite(obj):
        return None
    return obj


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def matrix_record(m) -> dict:
    m = np.asarray(m)
    return {"real": m.real.tolist(), "imag": m.imag.tolist()}
