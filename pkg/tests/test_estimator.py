"""Semiclassical estimator: fixed points, closed forms, loop modes."""

import math

import numpy as np
import pytest

from beamcool.estimator import (ControlGains, FilterState, feedback_u,
                                full_step, mb_step, run_closed_loop,
                                variance_step)
from beamcool.params import PhysicalParams, derive_params

TWO_PI = 2 * math.pi


def system(eta=0.6, **kw):
    base = dict(L=3.38e-11, C_j=7.4e17, I_c=10e-6, m=1e-16, eta=eta,
                omega_M=TWO_PI * 1e6, Bl=1e-6, Q=20.0, T_bath=0.1, phi_e=0.0,
                gamma_S=TWO_PI * 3e6, gamma_T=TWO_PI * 1e6,
                g_ST=TWO_PI * 0.5e6, omega_T=TWO_PI * 4e6)
    base.update(kw)
    p = PhysicalParams(**base)
    d = derive_params(p, overrides=dict(omega_S=TWO_PI * 20e6,
                                        g_MS=TWO_PI * 0.8e6,
                                        g_MT=TWO_PI * 0.15e6,
                                        gamma_M=TWO_PI * 0.05e6,
                                        nbar_M=1.5))
    return p, d


def test_vacuum_variances_are_exactly_stationary():
    p, d = system()
    f = FilterState(V_xT=0.5, V_pT=0.5, C_xTpT=0.0)
    out = variance_step(f, p, dt=1e-9)
    assert out.V_xT == 0.5
    assert out.V_pT == 0.5
    assert out.C_xTpT == 0.0


def test_variance_relaxation_closed_form_at_zero_efficiency():
    p, d = system(eta=1e-300)
    f = FilterState(V_xT=5.0, V_pT=5.0, C_xTpT=0.0)
    dt = 2e-10
    t_end = 1.5 / p.gamma_T
    steps = int(t_end / dt)
    for _ in range(steps):
        f = variance_step(f, p, dt)
    expected = 0.5 + 4.5 * math.exp(-p.gamma_T * steps * dt)
    assert f.V_xT == pytest.approx(expected, rel=2e-3)
    assert f.V_pT == pytest.approx(expected, rel=2e-3)


def test_variance_flow_preserves_uncertainty_floor():
    p, d = system()
    dt = 1e-10
    rng = np.random.default_rng(11)
    for _ in range(6):
        vx = rng.uniform(0.5, 4.0)
        vp = rng.uniform(0.5, 4.0)
        c = rng.uniform(-0.5, 0.5) * math.sqrt((vx - 0.5) * (vp - 0.5))
        f = FilterState(V_xT=vx, V_pT=vp, C_xTpT=c)
        for _ in range(4000):
            f = variance_step(f, p, dt)
            det = f.V_xT * f.V_pT - f.C_xTpT ** 2
            assert det >= 0.25 - 1e-9


def test_bloch_relaxation_closed_form():
    p, d = system()
    f = FilterState(sz=+1.0)
    rate = p.gamma_S * p.M_r ** 2
    dt = 1e-3 / rate
    steps = int(round(1.0 / (rate * dt)))
    g = ControlGains(0.0, 0.0)
    for _ in range(steps):
        f = mb_step(f, d, p, g, dW=0.0, dt=dt, u=0.0)
    expected = -1.0 + 2.0 * math.exp(-1.0)
    assert f.sz == pytest.approx(expected, rel=2 * dt * rate * 10)


def test_damped_mode_envelope():
    p, d0 = system()
    import dataclasses
    d = dataclasses.replace(d0, g_MT=0.0)
    f = FilterState(a_mean=1.0 + 0j, V_xT=0.5, V_pT=0.5, C_xTpT=0.0)
    dt = 1e-4 / p.omega_T
    steps = 3000
    g = ControlGains(0.0, 0.0)
    for _ in range(steps):
        f = full_step(f, d, p, g, dW=0.0, dt=dt, u=0.0)
    t = steps * dt
    assert abs(f.a_mean) == pytest.approx(math.exp(-0.5 * p.gamma_T * t),
                                          rel=1e-3)
    # phase rotates at omega_T
    assert np.angle(f.a_mean) == pytest.approx(
        float(np.angle(np.exp(-1j * p.omega_T * t))), abs=1e-3)


def test_bloch_purity_nonincreasing():
    p, d = system()
    rng = np.random.default_rng(3)
    g = ControlGains(0.0, 0.0)
    dt = 1e-11
    for _ in range(5):
        v = rng.normal(size=3)
        v = v / np.linalg.norm(v) * rng.uniform(0.2, 1.0)
        f = FilterState(sx=v[0], sy=v[1], sz=v[2])
        prev = np.inf
        for _ in range(2000):
            f = mb_step(f, d, p, g, dW=0.0, dt=dt, u=0.0)
            # purity relative to the relaxation target (-1 fixed point):
            # the Bloch norm may transiently grow toward the pole, but the
            # transverse part must decay monotonically
            trans = f.sx ** 2 + f.sy ** 2
            assert trans <= prev + 1e-15
            prev = trans


def test_feedback_law_algebra():
    g = ControlGains(v_x=0.0, v_p=2.0)
    assert feedback_u(FilterState(a_mean=0j), g) == 0.0
    assert feedback_u(FilterState(a_mean=0.5j), g) == pytest.approx(2.0)
    g2 = ControlGains(v_x=1.3, v_p=0.7)
    a1, a2 = 0.2 - 0.4j, -0.1 + 0.9j
    u1 = feedback_u(FilterState(a_mean=a1), g2)
    u2 = feedback_u(FilterState(a_mean=a2), g2)
    u12 = feedback_u(FilterState(a_mean=2.0 * a1 + 3.0 * a2), g2)
    assert u12 == pytest.approx(2.0 * u1 + 3.0 * u2, rel=1e-12)


def test_selfloop_zero_gain_equals_open_loop():
    p, d = system()
    from beamcool.kernels import rng as krng
    dt = 5e-10
    steps = 300
    g = ControlGains(0.0, 0.0)
    f0 = FilterState(sx=0.1, sz=-0.9, b_mean=0.2 + 0.1j, a_mean=0.05j)
    res = run_closed_loop(f0, d, p, g, dt, steps, mode="self", seed=4,
                          record_stride=1)
    dW = krng.wiener_increments(4, 0, steps, dt)
    f = f0
    for i in range(steps):
        f = full_step(f, d, p, g, dW[i], dt, u=0.0)
    assert np.allclose(res.final.to_vector(), f.to_vector(), rtol=1e-10,
                       atol=1e-12)


def test_replay_reproduces_u_series_bit_identically():
    p, d = system()
    dt = 5e-10
    steps = 400
    g = ControlGains(0.4 * p.omega_T, 0.6 * p.omega_T)
    f0 = FilterState()
    first = run_closed_loop(f0, d, p, g, dt, steps, mode="self", seed=8,
                            record_stride=1)
    dy = first.record[:, 12]
    replay = run_closed_loop(f0, d, p, g, dt, steps, mode="replay",
                             dY_record=dy, record_stride=1)
    assert np.array_equal(first.record[:, 11], replay.record[:, 11])
    assert np.array_equal(first.final.to_vector(), replay.final.to_vector())


def test_replay_requires_matching_length():
    p, d = system()
    with pytest.raises(ValueError):
        run_closed_loop(FilterState(), d, p, ControlGains(0, 0), 1e-9, 100,
                        mode="replay", dY_record=np.zeros(50))


def test_filter_state_validation():
    with pytest.raises(ValueError):
        FilterState(sx=1.0, sy=1.0, sz=1.0).validate()
    with pytest.raises(ValueError):
        FilterState(V_xT=-0.1).validate()
    with pytest.raises(ValueError):
        FilterState(V_xT=0.5, V_pT=0.5, C_xTpT=0.9).validate()
    FilterState().validate()
