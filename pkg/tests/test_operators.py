"""Operator algebra: ladder/Pauli constructors, superoperators, embeddings."""

import numpy as np
import pytest

from beamcool.operators import (HilbertSpace, clamp_negative_eigenvalues,
                                coherent_state, density_diagnostics,
                                dissipator, embed, expectation,
                                fock_annihilation, fock_state, gaussian_state,
                                meas_superop, partial_trace, pauli,
                                quadrature_ops, thermal_state,
                                top_level_population)

rng = np.random.default_rng(20260810)


def random_density(n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def test_annihilation_two_levels():
    assert np.allclose(fock_annihilation(2), [[0, 1], [0, 0]])


def test_annihilation_superdiagonal_sqrt():
    b = fock_annihilation(3)
    assert b[1, 2] == pytest.approx(np.sqrt(2.0))


def test_annihilation_rejects_small():
    with pytest.raises(ValueError):
        fock_annihilation(1)


def test_commutator_truncation_defect():
    b = fock_annihilation(10)
    comm = b @ b.conj().T - b.conj().T @ b
    expected = np.eye(10)
    expected[9, 9] = -9.0
    assert np.allclose(comm, expected, atol=1e-12)


def test_pauli_basics():
    assert np.allclose(pauli("z"), np.diag([1, -1]))
    assert np.allclose(pauli("plus") @ pauli("minus"), np.diag([1, 0]))
    assert np.allclose(pauli("plus") + pauli("minus"), pauli("x"))
    assert np.allclose((pauli("x") + 1j * pauli("y")) / 2, pauli("plus"))
    with pytest.raises(ValueError):
        pauli("w")


def test_embed_identity_and_commutation():
    space = HilbertSpace(n_beam=3, n_tlr=4)
    eye_full = embed(np.eye(3, dtype=complex), "beam", space)
    assert np.allclose(eye_full, np.eye(space.dim))
    B = embed(fock_annihilation(3), "beam", space)
    A = embed(fock_annihilation(4), "tlr", space)
    assert np.linalg.norm(B @ A - A @ B) == 0.0


def test_embed_trace_scaling_and_spectrum():
    space = HilbertSpace(n_beam=3, n_tlr=4)
    op = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    op = op + op.conj().T
    full = embed(op, "beam", space)
    assert np.trace(full) == pytest.approx(np.trace(op) * 2 * 4)
    w_small = np.sort(np.linalg.eigvalsh(op))
    w_full = np.sort(np.linalg.eigvalsh(full))
    assert np.allclose(w_full, np.repeat(w_small, 8), atol=1e-10)


def test_embed_dimension_mismatch():
    space = HilbertSpace(n_beam=3, n_tlr=4)
    with pytest.raises(ValueError):
        embed(np.eye(4, dtype=complex), "beam", space)


def test_dissipator_identity_is_zero():
    rho = random_density(5)
    out = dissipator(np.eye(5, dtype=complex), rho)
    assert np.allclose(out, 0.0)


def test_dissipator_traceless_random():
    for n in (3, 6):
        c = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        out = dissipator(c, random_density(n))
        assert abs(np.trace(out)) < 1e-12


def test_dissipator_single_photon_decay():
    rho = fock_state(3, 1)
    out = dissipator(fock_annihilation(3), rho)
    expected = fock_state(3, 0) - fock_state(3, 1)
    assert np.allclose(out, expected, atol=1e-14)


def test_meas_superop_eigenstate_vanishes():
    # any eigenstate of a Hermitian operator gives <c> rho cancellation
    c = np.diag(np.array([0.3, 1.2, -0.5]))
    rho = fock_state(3, 1)
    assert np.allclose(meas_superop(c.astype(complex), rho), 0.0, atol=1e-14)


def test_meas_superop_traceless():
    for n in (4, 7):
        c = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        out = meas_superop(c, random_density(n))
        assert abs(np.trace(out)) < 1e-12


def test_meas_superop_coherent_state_brute_force():
    n = 8
    rho = coherent_state(n, 0.6 - 0.2j)
    b = fock_annihilation(n)
    out = meas_superop(b, rho)
    ex = np.trace((b + b.conj().T) @ rho)
    brute = b @ rho + rho @ b.conj().T - ex.real * rho
    assert np.allclose(out, brute, atol=1e-13)


def test_expectation_basics():
    rho = random_density(6)
    assert expectation(np.eye(6, dtype=complex), rho) == pytest.approx(1.0)
    b = fock_annihilation(6)
    assert abs(expectation(b.conj().T @ b, fock_state(6, 0))) < 1e-14


def test_expectation_thermal_geometric_series():
    # independent oracle: sum n p_n for the truncated geometric distribution
    n, nbar = 60, 1.5
    rho = thermal_state(n, nbar)
    b = fock_annihilation(n)
    got = expectation(b.conj().T @ b, rho).real
    q = nbar / (1.0 + nbar)
    p = (1 - q) * q ** np.arange(n)
    p /= p.sum()
    oracle = float(np.sum(np.arange(n) * p))
    assert got == pytest.approx(oracle, abs=1e-12)
    assert got == pytest.approx(nbar, abs=1e-6)


def test_expectation_hermitian_real():
    rho = random_density(5)
    op = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    op = op + op.conj().T
    assert abs(expectation(op, rho).imag) < 1e-10


def test_partial_trace_product_state():
    space = HilbertSpace(n_beam=3, n_tlr=4)
    rb, rq, rt = random_density(3), random_density(2), random_density(4)
    rho = np.kron(np.kron(rb, rq), rt)
    assert np.allclose(partial_trace(rho, "beam", space), rb, atol=1e-12)
    assert np.allclose(partial_trace(rho, "qubit", space), rq, atol=1e-12)
    assert np.allclose(partial_trace(rho, "tlr", space), rt, atol=1e-12)
    red = partial_trace(rho, {"beam", "tlr"}, space)
    assert np.allclose(red, np.kron(rb, rt), atol=1e-12)
    assert np.trace(red) == pytest.approx(1.0, abs=1e-12)


def test_partial_trace_maximally_entangled():
    space = HilbertSpace(n_beam=2, n_tlr=2)
    psi = np.zeros(space.dim, dtype=complex)
    # Bell pair between beam and qubit, resonator in vacuum
    psi[0] = 1 / np.sqrt(2)          # |0,0,0>
    psi[(1 * 2 + 1) * 2 + 0] = 1 / np.sqrt(2)   # |1,1,0>
    rho = np.outer(psi, psi.conj())
    rq = partial_trace(rho, "qubit", space)
    assert np.allclose(rq, np.eye(2) / 2, atol=1e-12)


def test_partial_trace_invalid_slot():
    space = HilbertSpace(n_beam=2, n_tlr=2)
    with pytest.raises(ValueError):
        partial_trace(random_density(space.dim), "cavity", space)


def test_gaussian_state_moments_roundtrip():
    n = 40
    x, p = quadrature_ops(n)
    local = np.random.default_rng(42)
    for _ in range(6):
        mean = local.normal(scale=0.8, size=2)
        a = local.normal(scale=0.4, size=(2, 2))
        cov = a @ a.T + 0.55 * np.eye(2)
        rho = gaussian_state(n, mean, cov)
        mx = np.trace(x @ rho).real
        mp = np.trace(p @ rho).real
        vx = np.trace(x @ x @ rho).real - mx ** 2
        vp = np.trace(p @ p @ rho).real - mp ** 2
        cxp = np.trace((x @ p + p @ x) / 2 @ rho).real - mx * mp
        assert mx == pytest.approx(mean[0], abs=2e-4)
        assert mp == pytest.approx(mean[1], abs=2e-4)
        assert vx == pytest.approx(cov[0, 0], abs=2e-4)
        assert vp == pytest.approx(cov[1, 1], abs=2e-4)
        assert cxp == pytest.approx(cov[0, 1], abs=2e-4)


def test_clamp_and_diagnostics():
    rho = np.diag([0.7, 0.4, -1e-6]).astype(complex)
    out, repaired = clamp_negative_eigenvalues(rho, floor=-1e-8)
    assert repaired
    w = np.linalg.eigvalsh(out)
    assert w[0] >= -1e-15
    assert np.trace(out).real == pytest.approx(1.0)
    d = density_diagnostics(out)
    assert d["trace"] == pytest.approx(1.0)
    rho2 = np.diag([0.6, 0.4 - 1e-10, 1e-10]).astype(complex)
    _, repaired2 = clamp_negative_eigenvalues(rho2, floor=-1e-8)
    assert not repaired2


def test_top_level_population():
    rho = thermal_state(20, 2.0)
    leak = top_level_population(rho)
    q = 2.0 / 3.0
    expected = (q ** 18 + q ** 19) * (1 - q) / (1 - q ** 20)
    assert leak == pytest.approx(expected, rel=1e-10)
