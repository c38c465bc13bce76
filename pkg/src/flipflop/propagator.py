"""Time-ordered propagation of one or two flip-flop qubits.

The evolution over each step is exp(-i 2π H̄ Δt) with H in Hz and H̄ the
step average of H(t) by Gauss-Legendre quadrature (one node is the midpoint
rule). Noise enters with sample-and-hold. Steps never straddle a schedule breakpoint;
noise-free static stretches are covered by a single exponential unless
a trajectory is being recorded.

Because every term conserves S_z + I_z per qubit, the unitary is block
diagonal over spin sectors and each block is propagated on its own.
"""

from __future__ import annotations

import dataclasses
import functools
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .model import (
    EXCITED_PROJECTOR,
    LOGICAL,
    LOGICAL_2Q,
    SECTORS,
    SIGMA_Z_FF,
    CouplingGeometry,
    DeviceParams,
    dipole_coupling,
    hamiltonian_coefficients,
    position_coefficients,
    position_operator_z,
    sector_operators,
)
from .noise import NoiseTrace
from .pulses import PulseSchedule

DEFAULT_DT = 1e-12
UNITARITY_TOL = 1e-9
_CHUNK = 8192


class NumericalError(RuntimeError):
    """Propagation produced a non-finite Hamiltonian or lost unitarity."""


@dataclass(frozen=True)
class TimeGrid:
    """Step edges of a propagation; ``dt`` is the largest allowed step."""

    t_start: float
    t_end: float
    dt: float
    edges: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        e = self.edges
        if len(e) < 1 or e[0] != self.t_start or e[-1] != self.t_end:
            raise ValueError("grid edges must span [t_start, t_end]")
        if np.any(np.diff(e) <= 0):
            raise ValueError("grid edges must increase")

    @property
    def n_steps(self) -> int:
        return len(self.edges) - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])


@dataclass(frozen=True)
class FrameSpec:
    frame: str = "laboratory"
    rotation_frequency: float = 0.0

    def __post_init__(self):
        if self.frame not in ("laboratory", "rotating"):
            raise ValueError(f"unknown frame {self.frame!r}")
        if self.frame == "rotating" and not self.rotation_frequency > 0:
            raise ValueError("a rotating frame needs a positive frequency")


LAB = FrameSpec()


def build_grid(
    schedules: Sequence[PulseSchedule],
    dt: float = DEFAULT_DT,
    t_start: float = 0.0,
    t_end: float | None = None,
    merge_static: bool = True,
) -> TimeGrid:
    total = schedules[0].total_time
    for s in schedules[1:]:
        if abs(s.total_time - total) > 1e-9 * total:
            raise ValueError("qubit schedules must have the same duration")
    if t_end is None:
        t_end = total
    if not (0 <= t_start <= t_end <= total * (1 + 1e-12)):
        raise ValueError("requested interval lies outside the schedule")
    points = np.unique(np.concatenate([s.boundaries for s in schedules]))
    points = points[(points > t_start) & (points < t_end)]
    points = np.concatenate([[t_start], points, [t_end]]) if t_end > t_start else np.array([t_start])
    edges = [np.array([t_start])]
    for a, b in zip(points[:-1], points[1:]):
        if b - a <= 1e-12 * max(total, 1e-30):
            continue
        if merge_static and all(s.is_static_between(a, b) for s in schedules):
            edges.append(np.array([b]))
            continue
        n = max(1, int(np.ceil((b - a) / dt * (1 - 1e-9))))
        inner = a + (b - a) * np.arange(1, n + 1) / n
        inner[-1] = b
        edges.append(inner)
    return TimeGrid(t_start, t_end, dt, np.concatenate(edges))


# --- matrix exponentials ----------------------------------------------------


def expm_hermitian_stack(h: np.ndarray, dt) -> np.ndarray:
    """exp(-i 2π H Δt) for a stack of Hermitian H (Hz) and steps Δt (s).

    The trace is removed before exponentiating and restored as a scalar
    phase, which keeps the generator norm (and the squaring count) small.
    """
    h = np.asarray(h)
    n, k, _ = h.shape
    dt = np.broadcast_to(np.asarray(dt, float), (n,))
    tr = np.trace(h, axis1=1, axis2=2).real / k
    x = (-2j * np.pi * dt)[:, None, None] * (h - tr[:, None, None] * np.eye(k))
    out = linalg.expm(x)
    out *= np.exp(-2j * np.pi * tr * dt)[:, None, None]
    return out


def ordered_product(stack: np.ndarray) -> np.ndarray:
    """E[n-1] @ ... @ E[1] @ E[0] by pairwise reduction."""
    s = stack
    if len(s) == 0:
        raise ValueError("empty stack")
    while len(s) > 1:
        if len(s) % 2:
            s = np.concatenate([s[1:-1:2] @ s[0:-1:2], s[-1:]])
        else:
            s = s[1::2] @ s[0::2]
    return s[0]


# --- sector Hamiltonians ----------------------------------------------------


@functools.lru_cache(maxsize=None)
def _sector_basis(key) -> np.ndarray:
    """Operator stack whose weights give the sector Hamiltonian.

    One qubit: the 9 single-qubit terms. Two qubits: 9 terms on each qubit,
    then the 9 products (1, σz, σx) ⊗ (1, σz, σx) of the dipole coupling.
    """
    if not isinstance(key, tuple):
        return sector_operators(key)[0].astype(complex)
    ops1, z1, x1 = sector_operators(key[0])
    ops2, z2, x2 = sector_operators(key[1])
    i1, i2 = np.eye(len(z1)), np.eye(len(z2))
    terms = [np.kron(o, i2) for o in ops1] + [np.kron(i1, o) for o in ops2]
    terms += [np.kron(a, b) for a in (i1, z1, x1) for b in (i2, z2, x2)]
    return np.array(terms, dtype=complex)


def _step_coefficients(de, eac, weights, params, g):
    """Step-averaged weights of the sector operator basis.

    ``de`` and ``eac`` have shape (n_qubits, n_steps, n_nodes); the average
    uses the quadrature ``weights`` (summing to 1) over the nodes.
    """
    single = np.einsum("qnjk,j->qnk", hamiltonian_coefficients(de, eac, params), weights)
    if len(de) == 1:
        return single[0]
    a, b = position_coefficients(de, params)
    v = np.stack([np.ones_like(a), a, b], axis=-1)  # (2, n, nodes, 3)
    pair = np.einsum("njx,njy,j->nxy", v[0], v[1], weights).reshape(len(a[0]), 9)
    return np.concatenate([single[0], single[1], g * pair], axis=1)


def _sector_list(n_qubits: int, which: str):
    if which == "logical":
        return [0] if n_qubits == 1 else [(0, 0)]
    if which != "all":
        raise ValueError("sectors must be 'all' or 'logical'")
    keys = list(SECTORS)
    return keys if n_qubits == 1 else list(itertools.product(keys, keys))


def sector_indices(key) -> np.ndarray:
    if isinstance(key, tuple):
        return np.array([8 * i + j for i in SECTORS[key[0]] for j in SECTORS[key[1]]])
    return np.array(SECTORS[key])


# --- results ----------------------------------------------------------------


@dataclass
class Propagation:
    grid: TimeGrid
    n_qubits: int
    blocks: dict
    params: DeviceParams
    frame: FrameSpec = LAB
    times: np.ndarray | None = None
    states: np.ndarray | None = None
    fields: np.ndarray | None = None  # (n_qubits, n_records) dc field incl. noise

    @property
    def dim(self) -> int:
        return 8**self.n_qubits

    @property
    def logical_indices(self) -> tuple:
        return LOGICAL if self.n_qubits == 1 else LOGICAL_2Q

    @property
    def unitary(self) -> np.ndarray:
        expected = len(_sector_list(self.n_qubits, "all"))
        if len(self.blocks) != expected:
            raise ValueError("only part of the spin sectors was propagated")
        u = np.zeros((self.dim, self.dim), dtype=complex)
        for key, block in self.blocks.items():
            idx = sector_indices(key)
            u[np.ix_(idx, idx)] = block
        return u

    def logical_block(self) -> np.ndarray:
        key = 0 if self.n_qubits == 1 else (0, 0)
        idx = list(sector_indices(key))
        pos = [idx.index(i) for i in self.logical_indices]
        return self.blocks[key][np.ix_(pos, pos)]

    def observables(self) -> dict[str, np.ndarray]:
        """Expectation values along the recorded trajectory."""
        if self.states is None:
            raise ValueError("no trajectory was recorded")
        out = {}
        for q in range(self.n_qubits):
            rho = _reduced(self.states, q, self.n_qubits)
            suffix = "" if self.n_qubits == 1 else f"_{q + 1}"
            out["sz_ff" + suffix] = np.einsum("nii,i->n", rho, np.diag(SIGMA_Z_FF)).real
            out["sx_ff" + suffix] = 2 * (rho[:, 0, 4] + rho[:, 2, 7]).real
            zid = position_operator_z(self.fields[q], self.params)
            out["sz_id" + suffix] = np.einsum("nij,nji->n", rho, zid).real
            out["e_pop" + suffix] = np.einsum("nii,i->n", rho, np.diag(EXCITED_PROJECTOR)).real
        return out


def _reduced(states, qubit, n_qubits):
    if n_qubits == 1:
        return np.einsum("ni,nj->nij", states, states.conj())
    m = states.reshape(-1, 8, 8)
    if qubit == 0:
        return np.einsum("nia,nja->nij", m, m.conj())
    return np.einsum("nai,naj->nij", m, m.conj())


def _check_unitary(u, what):
    err = np.abs(u.conj().T @ u - np.eye(len(u))).max()
    if not err <= UNITARITY_TOL:
        raise NumericalError(f"{what} lost unitarity: max|U'U - I| = {err:.3g}")


def propagate(
    schedules,
    params: DeviceParams,
    geometry: CouplingGeometry | None = None,
    noise: Sequence[NoiseTrace | None] | NoiseTrace | None = None,
    dt: float = DEFAULT_DT,
    t_start: float = 0.0,
    t_end: float | None = None,
    initial_state: np.ndarray | None = None,
    record_every: int = 1,
    sectors: str = "all",
    nodes: int = 3,
) -> Propagation:
    """Evolve under one schedule (one qubit) or two schedules (two qubits).

    ``noise`` holds one trace per qubit (or None); its sample-and-hold value
    is added to the dc field. With ``initial_state`` the state is stored
    every ``record_every`` steps. ``sectors="logical"`` skips the spin
    sectors that cannot be reached from the logical states. Each step uses
    the generator averaged over ``nodes`` Gauss-Legendre points; ``nodes=1``
    is the plain midpoint rule.
    """
    if nodes < 1:
        raise ValueError("nodes must be at least 1")
    if isinstance(schedules, PulseSchedule):
        schedules = [schedules]
    schedules = list(schedules)
    n_qubits = len(schedules)
    if n_qubits not in (1, 2):
        raise ValueError("one or two schedules expected")
    if (geometry is None) != (n_qubits == 1):
        raise ValueError("a geometry is required exactly for two qubits")
    if noise is None or isinstance(noise, NoiseTrace):
        noise = [noise] * n_qubits if noise is None else [noise]
    noise = list(noise)
    if len(noise) != n_qubits:
        raise ValueError("one noise trace (or None) per qubit expected")
    has_noise = any(tr is not None for tr in noise)
    recording = initial_state is not None
    grid = build_grid(schedules, dt, t_start, t_end, merge_static=not (has_noise or recording))

    steps = grid.steps
    x, w = np.polynomial.legendre.leggauss(nodes)
    weights = w / 2
    tn = grid.edges[:-1, None] + steps[:, None] * (x + 1) / 2
    de = np.array([s.dc_field(tn) for s in schedules]).reshape(n_qubits, *tn.shape)
    eac = np.array([s.ac_field(tn) for s in schedules]).reshape(n_qubits, *tn.shape)
    for q, tr in enumerate(noise):
        if tr is not None and tn.size:
            try:
                de[q] = de[q] + tr.sample(tn)
            except ValueError as exc:
                raise ValueError(f"noise trace of qubit {q + 1} does not cover the grid") from exc
    if not (np.all(np.isfinite(de)) and np.all(np.isfinite(eac))):
        raise NumericalError("non-finite control fields")
    g = dipole_coupling(params, geometry) if geometry is not None else 0.0

    keys = _sector_list(n_qubits, sectors)
    dim = 8**n_qubits
    if recording:
        psi0 = np.asarray(initial_state, dtype=complex).reshape(dim)
        psi0 = psi0 / np.linalg.norm(psi0)
        rec_idx = np.arange(0, grid.n_steps + 1, record_every)
        if rec_idx[-1] != grid.n_steps:
            rec_idx = np.append(rec_idx, grid.n_steps)
        states = np.zeros((len(rec_idx), dim), dtype=complex)
        states[0] = psi0

    blocks = {}
    for key in keys:
        idx = sector_indices(key)
        u = np.eye(len(idx), dtype=complex)
        vec = psi0[idx].copy() if recording else None
        track = recording and np.any(vec != 0)
        for lo in range(0, grid.n_steps, _CHUNK):
            hi = min(lo + _CHUNK, grid.n_steps)
            coeff = _step_coefficients(de[:, lo:hi], eac[:, lo:hi], weights, params, g)
            h = np.einsum("nk,kij->nij", coeff, _sector_basis(key))
            if not np.all(np.isfinite(h)):
                raise NumericalError("non-finite Hamiltonian entries")
            ex = expm_hermitian_stack(h, steps[lo:hi])
            if track:
                want = rec_idx[(rec_idx > lo) & (rec_idx <= hi)]
                j = 0
                for step in range(lo, hi):
                    vec = ex[step - lo] @ vec
                    if j < len(want) and want[j] == step + 1:
                        states[np.searchsorted(rec_idx, step + 1), idx] = vec
                        j += 1
            u = ordered_product(ex) @ u
        _check_unitary(u, f"sector {key}")
        blocks[key] = u

    prop = Propagation(grid=grid, n_qubits=n_qubits, blocks=blocks, params=params)
    if recording:
        edges = grid.edges[rec_idx]
        fields = np.array([s.dc_field(edges) for s in schedules]).reshape(n_qubits, -1)
        for q, tr in enumerate(noise):
            if tr is not None:
                fields[q] = fields[q] + tr.sample(np.minimum(edges, tr.spec.duration * (1 - 1e-12)))
        prop.times, prop.states, prop.fields = edges, states, fields
    return prop


# --- frames and Bloch vectors -----------------------------------------------


def _frame_phases(frame: FrameSpec, t, n_qubits):
    """Diagonal of V(t) = exp(+i 2π f t Σz / 2) for each time in t."""
    t = np.atleast_1d(np.asarray(t, float))
    f = frame.rotation_frequency if frame.frame == "rotating" else 0.0
    one = np.exp(1j * np.pi * f * np.multiply.outer(t, np.diag(SIGMA_Z_FF)))
    if n_qubits == 1:
        return one
    return np.einsum("ni,nj->nij", one, one).reshape(len(t), 64)


def to_rotating_frame(prop: Propagation, frame: FrameSpec) -> Propagation:
    """Express the unitary and trajectory in ``frame``.

    The transform is taken relative to the laboratory frame; applying it to
    an already rotated propagation is an error.
    """
    if prop.frame.frame != "laboratory":
        raise ValueError("propagation is already in a rotating frame")
    if frame.frame == "laboratory":
        return prop
    t0, t1 = prop.grid.t_start, prop.grid.t_end
    v0 = _frame_phases(frame, t0, prop.n_qubits)[0]
    v1 = _frame_phases(frame, t1, prop.n_qubits)[0]
    blocks = {}
    for key, u in prop.blocks.items():
        idx = sector_indices(key)
        blocks[key] = (v1[idx][:, None] * u) * v0[idx].conj()[None, :]
    out = dataclasses.replace(prop, blocks=blocks, frame=frame)
    if prop.states is not None:
        out.states = prop.states * _frame_phases(frame, prop.times, prop.n_qubits)
    return out


def bloch_trajectory(prop: Propagation, qubit_index: int = 0) -> np.ndarray:
    """Rows (t, x, y, z, leakage) of one qubit's logical Bloch vector.

    The state is projected onto {|0>, |1>} (after tracing out the other
    qubit) and renormalized; x, y, z are NaN when nothing is left there.
    """
    if prop.states is None:
        raise ValueError("no trajectory was recorded")
    if not 0 <= qubit_index < prop.n_qubits:
        raise ValueError("qubit index out of range")
    rho = _reduced(prop.states, qubit_index, prop.n_qubits)
    i0, i1 = LOGICAL
    p0 = rho[:, i0, i0].real
    p1 = rho[:, i1, i1].real
    pop = p0 + p1
    coh = rho[:, i0, i1]  # <0|rho|1>
    with np.errstate(invalid="ignore", divide="ignore"):
        ok = pop > 1e-12
        x = np.where(ok, 2 * coh.real / pop, np.nan)
        y = np.where(ok, -2 * coh.imag / pop, np.nan)
        z = np.where(ok, (p1 - p0) / pop, np.nan)
    return np.column_stack([prop.times, x, y, z, 1 - pop])
