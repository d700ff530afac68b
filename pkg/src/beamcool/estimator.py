"""Semiclassical estimator: Maxwell-Bloch mean equations for the qubit and
the two modes plus the resonator second-moment flow, and the linear feedback
law acting on the estimated resonator quadratures.

This is the real-time filter a signal processor would integrate against the
homodyne record; the conditional master equations are the oracle for it.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .kernels import get_backend, rng


@dataclass(frozen=True)
class ControlGains:
    v_x: float
    v_p: float

    @classmethod
    def from_ratio(cls, p, vx_over_wt, vp_over_wt):
        return cls(vx_over_wt * p.omega_T, vp_over_wt * p.omega_T)


@dataclass
class FilterState:
    sx: float = 0.0
    sy: float = 0.0
    sz: float = -1.0
    b_mean: complex = 0j
    a_mean: complex = 0j
    V_xT: float = 0.5
    V_pT: float = 0.5
    C_xTpT: float = 0.0

    def validate(self, tol=1e-6):
        bloch = self.sx ** 2 + self.sy ** 2 + self.sz ** 2
        if bloch > 1.0 + tol:
            raise ValueError(f"Bloch vector outside the sphere: {bloch}")
        if self.V_xT < 0 or self.V_pT < 0:
            raise ValueError("negative resonator variance")
        if abs(self.C_xTpT) > math.sqrt(self.V_xT * self.V_pT) + 1e-9:
            raise ValueError("covariance violates Cauchy-Schwarz")
        return self

    def to_vector(self):
        return np.array([self.sx, self.sy, self.sz,
                         self.b_mean.real, self.b_mean.imag,
                         self.a_mean.real, self.a_mean.imag,
                         self.V_xT, self.V_pT, self.C_xTpT])

    @classmethod
    def from_vector(cls, v):
        return cls(sx=v[0], sy=v[1], sz=v[2],
                   b_mean=complex(v[3], v[4]), a_mean=complex(v[5], v[6]),
                   V_xT=v[7], V_pT=v[8], C_xTpT=v[9])


def filter_params_vector(d, p):
    """Parameter vector consumed by the filter kernels."""
    return np.array([d.omega_S, p.omega_M, p.omega_T, d.g_MT, d.gamma_M,
                     p.gamma_S, p.gamma_T, p.M_phi, p.M_r, p.eta])


def feedback_u(f, gains):
    """u = -2 v_x Re<a> + 2 v_p Im<a>; linear in the estimated amplitude."""
    return -2.0 * gains.v_x * f.a_mean.real + 2.0 * gains.v_p * f.a_mean.imag


def mb_step(f, d, p, gains, dW, dt, u=None):
    """Euler-Maruyama update of the five mean equations (Bloch + two modes).

    u defaults to the feedback law evaluated on the current state; pass
    u=0.0 for open-loop evolution. Second moments are advanced separately
    by variance_step (the kernels do both in lockstep).
    """
    if u is None:
        u = feedback_u(f, gains)
    pars = filter_params_vector(d, p)
    kern = get_backend()
    v = kern.filter_step(f.to_vector(), pars, u, dW, dt)
    # keep this an update of the means only
    out = FilterState.from_vector(v)
    return replace(out, V_xT=f.V_xT, V_pT=f.V_pT, C_xTpT=f.C_xTpT)


def variance_step(f, p, dt):
    """Deterministic update of the resonator second moments."""
    pars = np.array([0.0, 0.0, p.omega_T, 0.0, 0.0, 0.0, p.gamma_T,
                     p.M_phi, p.M_r, p.eta])
    kern = get_backend()
    v = kern.filter_step(f.to_vector(), pars, 0.0, 0.0, dt)
    return replace(f, V_xT=v[7], V_pT=v[8], C_xTpT=v[9])


def full_step(f, d, p, gains, dW, dt, u=None):
    """Means and second moments advanced together (the production path)."""
    if u is None:
        u = feedback_u(f, gains)
    pars = filter_params_vector(d, p)
    kern = get_backend()
    return FilterState.from_vector(
        kern.filter_step(f.to_vector(), pars, u, dW, dt))


@dataclass
class ClosedLoopResult:
    record: np.ndarray       # [t, sx, sy, sz, re_b, im_b, re_a, im_a,
                             #  VxT, VpT, CxTpT, u, dY]
    final: FilterState

    COLUMNS = ("time_s", "sx", "sy", "sz", "re_b", "im_b", "re_a", "im_a",
               "VxT", "VpT", "CxTpT", "u", "dY")


def run_closed_loop(f0, d, p, gains, dt, steps, mode="self", seed=0,
                    traj_index=0, dY_record=None, feedback=True,
                    record_stride=1, backend=None):
    """Drive the estimator in a closed loop.

    mode "self": the filter's own innovation drives it (fresh noise from the
    seeded stream). mode "replay": consume a recorded homodyne increment
    sequence dY_record; the filter computes its own innovation from it.
    (Plant-in-the-loop operation lives in the full-SME engine, which embeds
    this filter.)
    """
    pars = filter_params_vector(d, p)
    n_samples = (steps + record_stride - 1) // record_stride
    record = np.zeros((n_samples, 13))
    kern = get_backend(backend)
    if mode == "self":
        dW = rng.wiener_increments(seed, traj_index, steps, dt)
        fvec = kern.filter_selfloop_run(
            f0.to_vector(), pars, gains.v_x, gains.v_p, feedback, dt, dW,
            record_stride, record)
        return ClosedLoopResult(record, FilterState.from_vector(fvec))
    if mode == "replay":
        if dY_record is None or len(dY_record) < steps:
            raise ValueError("replay mode needs a dY sequence of >= steps")
        f = f0.to_vector()
        sqeg = math.sqrt(p.eta * p.gamma_T)
        sample = 0
        for i in range(steps):
            u = (-2.0 * gains.v_x * f[5] + 2.0 * gains.v_p * f[6]) \
                if feedback else 0.0
            dw_f = dY_record[i] - sqeg * 2.0 * f[5] * dt
            if i % record_stride == 0:
                record[sample, 0] = i * dt
                record[sample, 1:11] = f
                record[sample, 11] = u
                record[sample, 12] = dY_record[i]
                sample += 1
            f = kern.filter_step(f, pars, u, dw_f, dt)
        return ClosedLoopResult(record, FilterState.from_vector(f))
    raise ValueError(f"unknown closed-loop mode {mode!r}")
