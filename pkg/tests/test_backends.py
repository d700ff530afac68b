"""Noise streams and numba/numpy backend equivalence."""

import math

import numpy as np
import pytest

from beamcool.estimator import ControlGains
from beamcool.kernels import get_backend, rng
from beamcool.operators import HilbertSpace, fock_state, thermal_state
from beamcool.params import PhysicalParams, derive_params
from beamcool.reduced import compute_coeffs, moment_matrices

TWO_PI = 2 * math.pi


def small_system():
    p = PhysicalParams(L=3.38e-11, C_j=7.4e17, I_c=10e-6, m=1e-16, eta=0.6,
                       omega_M=TWO_PI * 1e6, Bl=1e-6, Q=20.0, T_bath=0.1,
                       phi_e=0.0, gamma_S=TWO_PI * 3e6, gamma_T=TWO_PI * 1e6,
                       g_ST=TWO_PI * 0.5e6, omega_T=TWO_PI * 4e6)
    d = derive_params(p, overrides=dict(omega_S=TWO_PI * 20e6,
                                        g_MS=TWO_PI * 0.8e6,
                                        g_MT=TWO_PI * 0.15e6,
                                        gamma_M=TWO_PI * 0.05e6,
                                        nbar_M=1.5))
    return p, d


def both_backends():
    try:
        nb = get_backend("numba")
    except ImportError:
        pytest.skip("numba unavailable")
    return nb, get_backend("numpy")


def test_wiener_increments_statistics():
    dt = 1e-3
    w = rng.wiener_increments(123, 0, 200_000, dt)
    assert abs(w.mean()) < 4 * math.sqrt(dt / w.size)
    assert w.var() == pytest.approx(dt, rel=0.02)


def test_substreams_differ_and_reproduce():
    a = rng.wiener_increments(9, 0, 64, 1.0)
    b = rng.wiener_increments(9, 1, 64, 1.0)
    a2 = rng.wiener_increments(9, 0, 64, 1.0)
    assert np.array_equal(a, a2)
    assert not np.array_equal(a, b)
    assert np.array_equal(rng.wiener_increments(9 ^ 1, 0, 64, 1.0), b)


def test_uniforms_in_unit_interval():
    u = rng.uniforms(7, 10_000)
    assert u.min() > 0.0
    assert u.max() <= 1.0


def test_moment_flow_backend_parity():
    nb, npk = both_backends()
    p, d = small_system()
    gains = ControlGains.from_ratio(p, 0.5, 0.75)
    rc = compute_coeffs(gains, d, p)
    A, D, Ru, Iu, k, Acl = moment_matrices(rc, d, p, gains)
    s0 = np.array([0.3, -0.2, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0])
    h = 1e-9
    out = {}
    for name, kern in (("nb", nb), ("np", npk)):
        s, steps, conv = kern.moment_flow(A, D, Ru, Iu, k, Acl, s0, h,
                                          500, 0.0, 2000)
        out[name] = s
        assert steps == 2000
    assert np.allclose(out["nb"], out["np"], rtol=1e-12, atol=1e-14)


def test_reduced_sme_backend_parity():
    nb, npk = both_backends()
    p, d = small_system()
    gains = ControlGains.from_ratio(p, 0.5, 0.75)
    rc = compute_coeffs(gains, d, p)
    from beamcool.reduced import reduced_sme_trajectory
    rho0 = thermal_state(16, 1.0)
    out = {}
    for prop in ("splitstep", "euler"):
        for name in ("numba", "numpy"):
            rho, rec, inn, rep = reduced_sme_trajectory(
                rho0, rc, d, p, gains, 1e-9, 150, seed=7, traj_index=2,
                record_stride=50, propagator=prop, backend=name)
            out[name] = (rho, rec, inn)
        assert np.max(np.abs(out["numba"][0] - out["numpy"][0])) < 1e-13
        assert np.allclose(out["numba"][1], out["numpy"][1], atol=1e-10)
        assert np.allclose(out["numba"][2], out["numpy"][2], atol=1e-12)


def test_full_sme_backend_parity():
    nb, npk = both_backends()
    p, d = small_system()
    from beamcool.fullsme import SmeConfig, simulate_trajectory
    space = HilbertSpace(n_beam=4, n_tlr=3)
    rho0 = np.kron(np.kron(thermal_state(4, 0.3), fock_state(2, 1)),
                   fock_state(3, 1)).astype(complex)
    for prop in ("splitstep", "euler"):
        cfg = SmeConfig(dt=2e-10, steps=120, seed=5, propagator=prop,
                        record_stride=40)
        out = {}
        for name in ("numba", "numpy"):
            rec, rho, f, inn = simulate_trajectory(
                rho0, space, cfg, d, p, controller="estimator",
                gains=ControlGains.from_ratio(p, 0.5, 0.75), backend=name)
            out[name] = (rho, rec.data, f.to_vector(), inn)
        assert np.max(np.abs(out["numba"][0] - out["numpy"][0])) < 1e-12
        assert np.allclose(out["numba"][1], out["numpy"][1], atol=1e-9)
        assert np.allclose(out["numba"][2], out["numpy"][2], atol=1e-12)


def test_filter_backend_parity():
    nb, npk = both_backends()
    p, d = small_system()
    pars = np.array([d.omega_S, p.omega_M, p.omega_T, d.g_MT, d.gamma_M,
                     p.gamma_S, p.gamma_T, p.M_phi, p.M_r, p.eta])
    f0 = np.array([0.2, -0.1, -0.8, 0.1, 0.0, 0.05, -0.02, 0.6, 0.5, 0.01])
    dW = rng.wiener_increments(3, 0, 400, 1e-9)
    rec_nb = np.zeros((400, 13))
    rec_np = np.zeros((400, 13))
    a = nb.filter_selfloop_run(f0, pars, 1e5, 2e5, True, 1e-9, dW, 1, rec_nb)
    b = npk.filter_selfloop_run(f0, pars, 1e5, 2e5, True, 1e-9, dW, 1, rec_np)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-15)
    assert np.allclose(rec_nb, rec_np, rtol=1e-10, atol=1e-14)
