"""Parameter derivation, overrides, and regime validation."""

import math

import numpy as np
import pytest

from beamcool.constants import PHI0
from beamcool.params import (PhysicalParams, RegimeError, derive_params,
                             thermal_occupation, validate_regime)

TWO_PI = 2 * math.pi


def paper_physical(**kw):
    base = dict(L=3.38e-11, C_j=7.4e17, I_c=10e-6, m=1e-16, eta=0.6,
                omega_M=TWO_PI * 1e9, Bl=1e-6, Q=1e4, T_bath=0.1, phi_e=0.0,
                gamma_S=TWO_PI * 100e6, gamma_T=TWO_PI * 20e6,
                g_ST=TWO_PI * 20e6, omega_T=TWO_PI * 4.3e9)
    base.update(kw)
    return PhysicalParams(**base)


BENCH_OVERRIDES = dict(omega_S=TWO_PI * 6.3e9, g_MS=TWO_PI * 73e6,
                       g_MT=TWO_PI * 4.9e6, gamma_M=TWO_PI * 0.1e6)


def test_beta_l_hand_arithmetic():
    p = paper_physical()
    d = derive_params(p)
    assert d.beta_L == pytest.approx(TWO_PI * p.L * p.I_c / PHI0, rel=1e-14)
    assert d.beta_L == pytest.approx(1.027, abs=5e-4)


def test_overrides_carried_exactly():
    d = derive_params(paper_physical(), overrides=BENCH_OVERRIDES)
    assert d.omega_S == TWO_PI * 6.3e9
    assert d.g_MS == TWO_PI * 73e6
    assert d.g_MT == TWO_PI * 4.9e6
    assert d.gamma_M == TWO_PI * 0.1e6
    assert set(d.overridden) == set(BENCH_OVERRIDES)
    # formula values preserved alongside, and demonstrably different
    assert d.formula_values["g_MT"] == pytest.approx(TWO_PI * 1.005e6,
                                                     rel=0.02)
    assert d.formula_values["omega_S"] != d.omega_S


def test_quality_factor_sets_damping():
    d = derive_params(paper_physical())
    assert d.gamma_M == pytest.approx(TWO_PI * 0.1e6, rel=1e-12)
    d2 = derive_params(paper_physical(Q=2e4))
    assert d2.gamma_M == pytest.approx(d.gamma_M / 2.0, rel=1e-12)


def test_unknown_override_rejected():
    with pytest.raises(ValueError):
        derive_params(paper_physical(), overrides={"speed_of_light": 3e8})


def test_regime_all_pass_on_benchmark():
    p = paper_physical()
    d = derive_params(p, overrides=BENCH_OVERRIDES)
    checks = validate_regime(p, d)
    assert all(c.ok for c in checks)
    disp = next(c for c in checks if "beam-SQUID" in c.name)
    assert disp.ratio == pytest.approx(73.0 / 5300.0, rel=1e-9)


def test_regime_detuning_failure():
    p = paper_physical(g_ST=TWO_PI * 2e9)   # coupling equal to the detuning
    d = derive_params(p, overrides=BENCH_OVERRIDES)
    checks = validate_regime(p, d)
    bad = next(c for c in checks if "SQUID-resonator" in c.name)
    assert not bad.ok
    assert bad.ratio == pytest.approx(1.0, rel=1e-9)


def test_regime_adiabatic_failure():
    p = paper_physical()
    d0 = derive_params(p, overrides=BENCH_OVERRIDES)
    slow = d0.gamma_M * d0.nbar_M
    p2 = paper_physical(gamma_T=slow)
    d2 = derive_params(p2, overrides=BENCH_OVERRIDES)
    bad = next(c for c in validate_regime(p2, d2)
               if "fast resonator" in c.name)
    assert not bad.ok
    assert bad.ratio == pytest.approx(1.0, rel=1e-9)


def test_two_level_reduction_guard():
    with pytest.raises(RegimeError):
        derive_params(paper_physical(I_c=1e-7))   # beta_L < 1


def test_detuning_sign_guard():
    with pytest.raises(RegimeError):
        derive_params(paper_physical(),
                      overrides=dict(omega_S=TWO_PI * 0.5e9))


def test_nbar_conventions_and_monotonicity():
    w = TWO_PI * 1e9
    n_ang = thermal_occupation(w, 0.1, "angular")
    n_lin = thermal_occupation(w, 0.1, "linear")
    assert n_ang == pytest.approx(1.6235, abs=2e-4)
    assert n_lin == pytest.approx(12.598, abs=2e-3)
    temps = [0.02, 0.05, 0.1, 0.3, 1.0]
    vals = [thermal_occupation(w, t) for t in temps]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_physical_validation():
    with pytest.raises(ValueError):
        paper_physical(eta=0.0)
    with pytest.raises(ValueError):
        paper_physical(Q=-1.0)
