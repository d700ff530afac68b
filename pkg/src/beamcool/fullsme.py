"""Conditional stochastic master equation for the full beam (x) qubit (x)
resonator state under homodyne monitoring of the resonator, with the
semiclassical estimator available in the loop as the feedback controller.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .estimator import FilterState, filter_params_vector
from .hamiltonians import build_effective_hamiltonian, build_rwa_hamiltonian
from .kernels import get_backend, rng
from .operators import (HilbertSpace, dissipator, embed, fock_annihilation,
                        hermitize, meas_superop, pauli)

RECORD_COLUMNS = ("time_s", "dY", "u", "exp_xM", "exp_pM", "V_xM", "V_pM",
                  "exp_xT", "exp_pT", "exp_sz", "repairs")


@dataclass(frozen=True)
class SmeConfig:
    dt: float
    steps: int
    seed: int = 0
    hamiltonian_kind: str = "effective"
    propagator: str = "splitstep"       # exact unitary + EM kicks
    record_stride: int = 1
    renormalize_every: int = 1
    clamp_negativity: bool = True
    check_stride: int = 1
    clamp_floor: float = -1e-8

    def __post_init__(self):
        if self.dt <= 0 or self.steps < 1:
            raise ValueError("dt must be positive and steps >= 1")
        if self.hamiltonian_kind not in ("rwa", "effective"):
            raise ValueError(f"unknown hamiltonian kind "
                             f"{self.hamiltonian_kind!r}")
        if self.propagator not in ("euler", "splitstep"):
            raise ValueError(f"unknown propagator {self.propagator!r}")


@dataclass
class TrajectoryRecord:
    """Sampled trajectory output; data columns follow RECORD_COLUMNS."""
    data: np.ndarray
    repairs: int
    filter_data: np.ndarray = None
    columns: tuple = RECORD_COLUMNS

    @property
    def times(self):
        return self.data[:, 0]

    def column(self, name):
        return self.data[:, self.columns.index(name)]


def _collapse_ops(space, d, p):
    b = embed(fock_annihilation(space.n_beam), "beam", space)
    a = embed(fock_annihilation(space.n_tlr), "tlr", space)
    sz = embed(pauli("z"), "qubit", space)
    sm = embed(pauli("minus"), "qubit", space)
    return [
        (d.gamma_M * d.nbar_M, b.conj().T),
        (d.gamma_M * (d.nbar_M + 1.0), b),
        (p.gamma_S * p.M_phi ** 2, sz),
        (p.gamma_S * p.M_r ** 2, sm),
        (p.gamma_T, a),
    ], a


def sme_step(rho, H, space, d, p, dW, dt):
    """One conditional Euler-Maruyama step (dense reference implementation).

    Returns (rho', dY). The fast path for whole trajectories is
    simulate_trajectory; this form exists for tests and single-step use.
    """
    ops, a = _collapse_ops(space, d, p)
    xt = a + a.conj().T
    ex = np.trace(xt @ rho).real
    drho = -1j * (H @ rho - rho @ H)
    for rate, c in ops:
        if rate != 0.0:
            drho += rate * dissipator(c, rho)
    sq = math.sqrt(p.eta * p.gamma_T)
    rho1 = rho + dt * drho + sq * dW * meas_superop(a, rho)
    if not np.all(np.isfinite(rho1)):
        raise FloatingPointError("integration blow-up in sme_step")
    rho1 = hermitize(rho1)
    rho1 /= np.trace(rho1).real
    dY = sq * ex * dt + dW
    return rho1, dY


def build_hamiltonian(kind, d, space, p, u=0.0):
    if kind == "rwa":
        return build_rwa_hamiltonian(d, space, p, u=u)
    return build_effective_hamiltonian(d, space, p, u=u)


def _sparse_csr(mat, threshold=1e-14):
    m = sp.csr_matrix(np.where(np.abs(mat) > threshold, mat, 0.0))
    m.eliminate_zeros()
    return m


def stability_guard(cfg, d, p):
    """Warn when dt does not resolve the fastest rate/frequency."""
    fastest = max(d.omega_S, p.omega_T, p.omega_M, p.gamma_S, p.gamma_T,
                  d.gamma_M * (d.nbar_M + 1.0))
    if cfg.dt * fastest >= 0.1:
        warnings.warn(
            f"dt * fastest scale = {cfg.dt * fastest:.3f} >= 0.1; "
            "integration accuracy is not guaranteed", stacklevel=3)


def default_dt(d):
    """A conservative default: 200 steps per qubit period."""
    return 2.0 * math.pi / (200.0 * d.omega_S)


def simulate_trajectory(rho0, space, cfg, d, p, controller="null",
                        gains=None, f0=None, traj_index=0, backend=None):
    """Integrate one conditional trajectory.

    controller: "null" (u = 0) or "estimator" (the semiclassical filter is
    stepped on the trajectory's own record and closes the loop; it never
    sees the true state). Returns a TrajectoryRecord plus the final density
    matrix, final filter state and the per-step innovation buffer.
    """
    if rho0.shape != (space.dim, space.dim):
        raise ValueError(f"state shape {rho0.shape} does not match the "
                         f"product space dimension {space.dim}")
    stability_guard(cfg, d, p)
    H = build_hamiltonian(cfg.hamiltonian_kind, d, space, p, u=0.0)
    use_euler = cfg.propagator == "euler"
    if use_euler:
        h_csr = _sparse_csr(H)
        u_csr = sp.csr_matrix(H.shape, dtype=complex)
    else:
        from scipy.linalg import expm
        u_csr = _sparse_csr(expm(-1j * cfg.dt * H))
        h_csr = sp.csr_matrix(H.shape, dtype=complex)
    kind = {"null": 0, "estimator": 1}[controller]
    if kind == 1 and gains is None:
        raise ValueError("estimator controller needs gains")
    if gains is None:
        from .estimator import ControlGains
        gains = ControlGains(0.0, 0.0)
    if f0 is None:
        f0 = FilterState()
    dW = rng.wiener_increments(cfg.seed, traj_index, cfg.steps, cfg.dt)
    stride = cfg.record_stride
    n_samples = (cfg.steps + stride - 1) // stride if stride > 0 else 0
    record = np.zeros((n_samples, 11))
    filter_rec = np.zeros((n_samples, 10))
    innovation = np.zeros((cfg.steps, 2))
    check_stride = cfg.check_stride if cfg.clamp_negativity else 0
    kern = get_backend(backend)
    rho, fvec, repairs = kern.full_sme_run(
        rho0, u_csr.data, u_csr.indices, u_csr.indptr,
        h_csr.data, h_csr.indices, h_csr.indptr, use_euler,
        space.n_beam, space.n_tlr,
        d.gamma_M * d.nbar_M, d.gamma_M * (d.nbar_M + 1.0),
        p.gamma_S * p.M_phi ** 2, p.gamma_S * p.M_r ** 2, p.gamma_T,
        math.sqrt(p.eta * p.gamma_T), filter_params_vector(d, p),
        f0.to_vector(), gains.v_x, gains.v_p, kind, cfg.dt, dW, stride,
        cfg.clamp_floor, check_stride, cfg.renormalize_every,
        record, innovation, filter_rec)
    rec = TrajectoryRecord(record, repairs, filter_data=filter_rec)
    return rec, rho, FilterState.from_vector(fvec), innovation


@dataclass
class InnovationReport:
    n_steps: int
    mean: float
    variance: float
    dt: float
    mean_bound: float
    mean_ok: bool = field(init=False)
    variance_ok: bool = field(init=False)

    def __post_init__(self):
        self.mean_ok = abs(self.mean) < self.mean_bound
        self.variance_ok = 0.95 * self.dt <= self.variance <= 1.05 * self.dt


def innovation_stats(innovations, dt, min_steps=30):
    """Wiener-contract check of reconstructed increments.

    innovations: iterable of (n_steps, 2) arrays with columns [dY, signal];
    the reconstructed increment is dY - signal.
    """
    dws = [inn[:, 0] - inn[:, 1] for inn in innovations]
    allw = np.concatenate(dws)
    n = allw.size
    if n < min_steps:
        raise ValueError(f"too few samples for innovation statistics: {n}")
    mean = float(allw.mean())
    var = float(allw.var(ddof=1))
    return InnovationReport(n_steps=n, mean=mean, variance=var, dt=dt,
                            mean_bound=4.0 * math.sqrt(dt / n))
