"""Hamiltonians for the beam (x) qubit (x) resonator system.

Both builders return H/hbar in rad/s as dense matrices on the product space.
"""

import numpy as np

from .operators import HilbertSpace, embed, fock_annihilation, pauli


def _parts(space):
    b = embed(fock_annihilation(space.n_beam), "beam", space)
    a = embed(fock_annihilation(space.n_tlr), "tlr", space)
    sz = embed(pauli("z"), "qubit", space)
    sp = embed(pauli("plus"), "qubit", space)
    sm = embed(pauli("minus"), "qubit", space)
    return b, a, sz, sp, sm


def build_rwa_hamiltonian(d, space, p, u=0.0):
    """Rotating-wave Hamiltonian with excitation-conserving couplings.

    H/hbar = (w_S/2) sz + w_M b†b + w_T a†a + u (a† + a)
             + g_MS (b s+ + s- b†) + g_ST (-i a s+ + i s- a†)
    """
    b, a, sz, sp, sm = _parts(space)
    bd, ad = b.conj().T, a.conj().T
    h = (0.5 * d.omega_S * sz
         + p.omega_M * bd @ b
         + p.omega_T * ad @ a
         + u * (ad + a)
         + d.g_MS * (b @ sp + sm @ bd)
         + p.g_ST * (-1j * a @ sp + 1j * sm @ ad))
    return 0.5 * (h + h.conj().T)


def build_effective_hamiltonian(d, space, p, u=0.0):
    """Dispersive-frame Hamiltonian: qubit-conditioned shifts plus the
    qubit-conditioned beam-resonator swap at rate g_MT.
    """
    b, a, sz, sp, sm = _parts(space)
    bd, ad = b.conj().T, a.conj().T
    chi_b = d.g_MS ** 2 / d.Delta_MS
    chi_a = p.g_ST ** 2 / d.Delta_ST
    h = (p.omega_M * bd @ b
         + p.omega_T * ad @ a
         + u * (ad + a)
         + 0.5 * d.omega_S * sz
         + (chi_b * bd @ b + chi_a * ad @ a) @ sz
         + d.g_MT * (-1j * b @ ad + 1j * bd @ a) @ sz)
    return 0.5 * (h + h.conj().T)


def dispersive_transform(d, space, p, scale=1.0):
    """The unitary that dislodges the qubit from the oscillators to first
    order in g/Delta; used as a numerical oracle for the effective model.
    """
    from scipy.linalg import expm
    b, a, sz, sp, sm = _parts(space)
    bd, ad = b.conj().T, a.conj().T
    lam = scale * d.g_MS / d.Delta_MS
    mu = scale * p.g_ST / d.Delta_ST
    gen = lam * (b @ sp - bd @ sm) - mu * (1j * a @ sp + 1j * ad @ sm)
    return expm(gen)


def total_excitation(space):
    """b†b + a†a + s+ s-, conserved by the RWA Hamiltonian at u = 0."""
    b, a, sz, sp, sm = _parts(space)
    return b.conj().T @ b + a.conj().T @ a + sp @ sm
