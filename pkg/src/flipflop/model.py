"""Hamiltonians of one and two donor flip-flop qubits.

All energies are frequencies in Hz. Single-qubit operators live in an
eight-state space, ordered

    0: g↓⇑   1: g↓⇓   2: e↓⇑   3: g↑⇑   4: g↑⇓   5: e↓⇓   6: e↑⇑   7: e↑⇓

where g/e are the orbital eigenstates, ↓/↑ the electron spin and ⇓/⇑ the
nuclear spin. The logical states are |0> = g↓⇑ and |1> = g↑⇓. Two-qubit
operators are Kronecker products with qubit 1 as the major index.

Every term conserves the spin projection m = S_z + I_z of each qubit, so the
eight states split into three sectors (m = 0, -1, +1). The propagator uses
this block structure; the matrices built here are always the full ones.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import constants as _sc
from scipy.special import expit


@dataclass(frozen=True)
class PhysicalConstants:
    h: float = _sc.h
    e: float = _sc.e
    eps0: float = _sc.epsilon_0
    kB: float = _sc.k


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class DeviceParams:
    """Device constants of one flip-flop qubit.

    Parameters
    ----------
    d : float
        Donor depth below the interface (m).
    B0 : float
        Static magnetic field (T).
    Vt : float
        Donor-interface tunnel coupling (Hz).
    gamma_e, gamma_n : float
        Electron and nuclear gyromagnetic ratios (Hz/T).
    A0 : float
        Bulk hyperfine coupling (Hz).
    c_fit : float
        Steepness of the hyperfine fit A0 / (1 + exp(c_fit * dE)) (m/V).
    delta_gamma : float
        Relative change of the electron g-factor at the interface.
    Ez0 : float
        Vertical field at the ionization point (V/m). All control fields in
        this package are offsets from it.
    T_op : float
        Operating temperature (K), only used for the thermal sanity check.
    """

    d: float = 15e-9
    B0: float = 0.4
    Vt: float = 11.29e9
    gamma_e: float = 27.97e9
    gamma_n: float = 17.23e6
    A0: float = 117e6
    c_fit: float = 5.174e-4
    delta_gamma: float = -0.002
    Ez0: float = 0.0
    T_op: float = 0.1

    def __post_init__(self):
        for name in ("d", "B0", "Vt", "A0", "c_fit", "T_op"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not (self.gamma_e > self.gamma_n > 0):
            raise ValueError("gyromagnetic ratios must satisfy gamma_e > gamma_n > 0")
        if not np.isfinite(self.delta_gamma) or not np.isfinite(self.Ez0):
            raise ValueError("delta_gamma and Ez0 must be finite")
        zeeman = (self.gamma_e + self.gamma_n) * self.B0
        if zeeman / self.A0 <= 10:
            warnings.warn(
                f"Zeeman splitting {zeeman:.3g} Hz is not much larger than A0 "
                f"{self.A0:.3g} Hz; the flip-flop encoding assumes it is",
                stacklevel=2,
            )
        thermal = CONSTANTS.kB * self.T_op / CONSTANTS.h
        if thermal >= zeeman:
            warnings.warn(
                f"thermal energy {thermal:.3g} Hz exceeds the minimum qubit "
                f"splitting {zeeman:.3g} Hz",
                stacklevel=2,
            )

    def replace(self, **changes) -> "DeviceParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceParams":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise KeyError(f"unknown device parameter(s): {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class CouplingGeometry:
    """Placement of two qubits coupled by their electric dipoles.

    The dipoles are always taken perpendicular to the separation vector.
    """

    r: float
    eps_r: float = 11.7
    perpendicular_dipoles: bool = True

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r <= 0:
            raise ValueError(f"qubit separation must be positive, got {self.r!r}")
        if not self.eps_r > 1:
            raise ValueError(f"relative permittivity must exceed 1, got {self.eps_r!r}")
        if not self.perpendicular_dipoles:
            raise ValueError("only perpendicular dipole geometries are supported")


class BasisLabel(NamedTuple):
    orbital: str
    electron: str
    nucleus: str
    index: int


BASIS = tuple(
    BasisLabel(o, s, n, i)
    for i, (o, s, n) in enumerate(
        [
            ("g", "↓", "⇑"),
            ("g", "↓", "⇓"),
            ("e", "↓", "⇑"),
            ("g", "↑", "⇑"),
            ("g", "↑", "⇓"),
            ("e", "↓", "⇓"),
            ("e", "↑", "⇑"),
            ("e", "↑", "⇓"),
        ]
    )
)
LOGICAL = (0, 4)
LOGICAL_2Q = tuple(8 * a + b for a in LOGICAL for b in LOGICAL)

# positions of the basis states inside the product basis
# orbital(g, e) x electron(↓, ↑) x nucleus(⇓, ⇑)
_PERM = np.array([1, 0, 5, 3, 2, 4, 7, 6])

SECTORS = {0: (0, 2, 4, 7), -1: (1, 5), 1: (3, 6)}
"""Basis indices grouped by the conserved spin projection S_z + I_z."""

_I2 = np.eye(2)
_SZ = np.diag([1.0, -1.0])
_SX = np.array([[0.0, 1.0], [1.0, 0.0]])
_SPIN_Z = np.diag([-0.5, 0.5])
_SPIN_UP = np.array([[0.0, 0.0], [1.0, 0.0]])  # raising operator in (down, up)
_S_DOT_I = np.kron(_SPIN_Z, _SPIN_Z) + 0.5 * (
    np.kron(_SPIN_UP, _SPIN_UP.T) + np.kron(_SPIN_UP.T, _SPIN_UP)
)


def _basis_order(op: np.ndarray) -> np.ndarray:
    return op[np.ix_(_PERM, _PERM)]


def _product(orbital, electron, nucleus) -> np.ndarray:
    return _basis_order(np.kron(orbital, np.kron(electron, nucleus)))


# H = sum_k coefficient_k(dE, Eac) * _OPERATORS[k]
_OPERATORS = np.array(
    [
        _product(_SZ, _I2, _I2),
        _product(_SX, _I2, _I2),
        _product(_I2, _SPIN_Z, _I2),
        _product(_SZ, _SPIN_Z, _I2),
        _product(_SX, _SPIN_Z, _I2),
        _product(_I2, _I2, _SPIN_Z),
        _basis_order(np.kron(_I2, _S_DOT_I)),
        _basis_order(np.kron(_SZ, _S_DOT_I)),
        _basis_order(np.kron(_SX, _S_DOT_I)),
    ]
)
_ORBITAL_Z = _OPERATORS[0]
_ORBITAL_X = _OPERATORS[1]

SIGMA_Z_FF = np.diag([-1.0, 0, -1.0, 0, 1.0, 0, 0, 1.0])
"""|↑⇓><↑⇓| - |↓⇑><↓⇑| acting on the spins, identity on the orbital."""

EXCITED_PROJECTOR = np.diag([0.0, 0, 1, 0, 0, 1, 1, 1])


def _as_field(value, name):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def hyperfine_coupling(de, params: DeviceParams):
    """Hyperfine coupling A(dE) = A0 / (1 + exp(c dE)) in Hz."""
    return params.A0 * expit(-params.c_fit * np.asarray(de, dtype=float))


def hyperfine_slope(de, params: DeviceParams):
    """dA/d(dE) in Hz per V/m."""
    a = hyperfine_coupling(de, params)
    return -params.c_fit * a * (1.0 - a / params.A0)


def charge_detuning(de, params: DeviceParams):
    """d e dE / h: the donor-interface detuning in Hz."""
    return params.d * CONSTANTS.e * np.asarray(de, dtype=float) / CONSTANTS.h


def orbital_splitting(de, params: DeviceParams):
    """Orbital gap sqrt(Vt^2 + (d e dE / h)^2) in Hz."""
    return np.hypot(params.Vt, charge_detuning(de, params))


def flipflop_frequency(de, params: DeviceParams):
    """Bare flip-flop transition frequency sqrt(((γe+γn) B0)^2 + A^2) in Hz."""
    zeeman = (params.gamma_e + params.gamma_n) * params.B0
    return np.hypot(zeeman, hyperfine_coupling(de, params))


def position_coefficients(de, params: DeviceParams):
    """Coefficients (a, b) of the electron position σz^id = a σz + b σx."""
    eps = orbital_splitting(de, params)
    return charge_detuning(de, params) / eps, params.Vt / eps


def hamiltonian_coefficients(de, eac, params: DeviceParams) -> np.ndarray:
    """Weights of the fixed operator basis; shape (..., 9)."""
    de, eac = np.broadcast_arrays(np.asarray(de, float), np.asarray(eac, float))
    eps = orbital_splitting(de, params)
    a, b = position_coefficients(de, params)
    drive = params.d * CONSTANTS.e * eac / (2 * CONSTANTS.h)
    zeeman_e = params.gamma_e * params.B0
    shift = 0.5 * zeeman_e * params.delta_gamma
    hf = hyperfine_coupling(de, params)
    ones = np.ones_like(de)
    return np.stack(
        [
            -0.5 * eps - drive * a,
            -drive * b,
            (zeeman_e + shift) * ones,
            shift * a,
            shift * b,
            -params.gamma_n * params.B0 * ones,
            0.5 * hf,
            -0.5 * hf * a,
            -0.5 * hf * b,
        ],
        axis=-1,
    )


def build_single_hamiltonian(de, eac, params: DeviceParams) -> np.ndarray:
    """Flip-flop Hamiltonian H_orb + H_B0 + H_A (Hz) in the 8-state basis.

    Accepts scalars or arrays for ``de`` (field offset from the ionization
    point, V/m) and ``eac`` (instantaneous ac field, V/m); array inputs give a
    stack of matrices with shape ``broadcast(de, eac).shape + (8, 8)``.
    """
    de = _as_field(de, "de")
    eac = _as_field(eac, "eac")
    coeff = hamiltonian_coefficients(de, eac, params)
    return np.einsum("...k,kij->...ij", coeff, _OPERATORS).astype(complex)


def position_operator_z(de, params: DeviceParams) -> np.ndarray:
    """Electron position operator |i><i| - |d><d| in the 8-state basis."""
    a, b = position_coefficients(_as_field(de, "de"), params)
    return np.multiply.outer(a, _ORBITAL_Z) + np.multiply.outer(b, _ORBITAL_X)


def dipole_coupling(params: DeviceParams, geom: CouplingGeometry) -> float:
    """Prefactor d²e² / (16π ε0 εr h r³) of the dipole-dipole term, in Hz."""
    c = CONSTANTS
    return (params.d * c.e) ** 2 / (
        16 * np.pi * c.eps0 * geom.eps_r * c.h * geom.r**3
    )


def build_two_qubit_hamiltonian(
    de1, de2, eac1, eac2, params: DeviceParams, geom: CouplingGeometry
) -> np.ndarray:
    """64×64 Hamiltonian of two identical qubits with dipole-dipole coupling."""
    if geom is None:
        raise ValueError("two-qubit Hamiltonian needs a CouplingGeometry")
    h1 = build_single_hamiltonian(de1, eac1, params)
    h2 = build_single_hamiltonian(de2, eac2, params)
    eye = np.eye(8)
    p1 = eye + position_operator_z(de1, params)
    p2 = eye + position_operator_z(de2, params)
    g = dipole_coupling(params, geom)
    return np.kron(h1, eye) + np.kron(eye, h2) + g * np.kron(p1, p2)


def qubit_frequency(de, params: DeviceParams) -> float:
    """Dressed logical transition frequency at a static operating point.

    Unlike :func:`flipflop_frequency` this diagonalizes the full model, so it
    includes the interface g-factor shift and the spin-orbit dispersive
    shift. It is the frequency of the laboratory-frame precession.
    """
    w, v = np.linalg.eigh(build_single_hamiltonian(float(de), 0.0, params))
    i0 = int(np.argmax(np.abs(v[LOGICAL[0]])))
    i1 = int(np.argmax(np.abs(v[LOGICAL[1]])))
    return float(w[i1] - w[i0])


def sector_operators(sector: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Operator basis, σz and σx orbital factors restricted to one m-sector."""
    idx = np.array(SECTORS[sector])
    sl = np.ix_(idx, idx)
    return _OPERATORS[(slice(None),) + sl], _ORBITAL_Z[sl], _ORBITAL_X[sl]
