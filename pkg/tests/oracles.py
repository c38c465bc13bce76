"""Reference implementations written independently of the package code."""

import numpy as np
from scipy import constants as sc

# label order: (orbital, electron spin Sz, nuclear spin Iz)
LABELS = [
    ("g", -0.5, +0.5),
    ("g", -0.5, -0.5),
    ("e", -0.5, +0.5),
    ("g", +0.5, +0.5),
    ("g", +0.5, -0.5),
    ("e", -0.5, -0.5),
    ("e", +0.5, +0.5),
    ("e", +0.5, -0.5),
]


def _orbital(op, o1, o2):
    sz = {("g", "g"): 1.0, ("e", "e"): -1.0}
    if op == "1":
        return 1.0 if o1 == o2 else 0.0
    if op == "z":
        return sz.get((o1, o2), 0.0)
    return 0.0 if o1 == o2 else 1.0  # sigma_x


def _s_dot_i(s1, n1, s2, n2):
    if (s1, n1) == (s2, n2):
        return s1 * n1
    # flip-flop term S+I- + S-I+ over 2, matrix element 1/2
    if s1 + n1 == s2 + n2 and s1 != s2:
        return 0.5
    return 0.0


def single_hamiltonian(de, eac, p):
    """Element-by-element assembly of the orbital, Zeeman and hyperfine terms."""
    detune = p.d * sc.e * de / sc.h
    eps = np.sqrt(p.Vt**2 + detune**2)
    a, b = detune / eps, p.Vt / eps
    hf = p.A0 / (1 + np.exp(p.c_fit * de))
    drive = p.d * sc.e * eac / (2 * sc.h)
    h = np.zeros((8, 8))
    for i, (o1, s1, n1) in enumerate(LABELS):
        for j, (o2, s2, n2) in enumerate(LABELS):
            spin_same = s1 == s2 and n1 == n2
            zid = a * _orbital("z", o1, o2) + b * _orbital("x", o1, o2)
            v = 0.0
            if spin_same:
                v += -eps / 2 * _orbital("z", o1, o2) - drive * zid
                v += p.gamma_e * p.B0 * s1 * (_orbital("1", o1, o2) * (1 + p.delta_gamma / 2)
                                               + p.delta_gamma / 2 * zid)
                v += -p.gamma_n * p.B0 * n1 * _orbital("1", o1, o2)
            v += hf * (0.5 * _orbital("1", o1, o2) - 0.5 * zid) * _s_dot_i(s1, n1, s2, n2)
            h[i, j] = v
    return h


def doubled_space_fidelity(disturbed, ideal):
    """Overlap of the maximally entangled probe after ideal⁻¹·disturbed acts on one half."""
    d = len(ideal)
    psi = np.eye(d).reshape(d * d) / np.sqrt(d)  # sum_i |i>|i> / sqrt(d)
    rho = np.outer(psi, psi.conj())
    m = np.kron(np.eye(d), np.linalg.inv(ideal) @ disturbed)
    out = m @ rho @ m.conj().T
    return float(np.real(psi.conj() @ out @ psi))


def dipole_prefactor(r, d=15e-9, eps_r=11.7):
    return d**2 * sc.e**2 / (16 * np.pi * sc.epsilon_0 * eps_r * sc.h * r**3)


def random_unitary(rng, d):
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
