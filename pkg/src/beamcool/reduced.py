"""Beam-only reduced model: gain-to-coefficient algebra, gain-region checks,
the conditional Gaussian moment flow (fast engine), the truncated-Fock
conditional SME (oracle engine) and the closed-form stationary estimates.

Quadratures use hbar = 1 (vacuum variance 1/2); all rates are rad/s.
"""

import math
from dataclasses import dataclass

import numpy as np

from .kernels import get_backend, rng
from .operators import fock_annihilation

OMEGA2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


class GainRegionError(ValueError):
    pass


@dataclass(frozen=True)
class ReducedCoeffs:
    """Adiabatic-elimination coefficients for one gain pair.

    The imaginary sign of C2 is the one consistent with the momentum/position
    squeezing tradeoff (see decisions ledger); chi, C1 match the printed
    closed forms exactly.
    """
    C1: complex
    C2: complex
    chi: float
    alpha_x: complex
    alpha_p: complex
    xi_M: complex
    g_MT: float

    @property
    def cooling_rate(self):
        """Net collapse-channel damping gamma_T (|C1|² - |C2|²) prefactor."""
        return abs(self.C1) ** 2 - abs(self.C2) ** 2


def compute_coeffs(gains, d, p):
    """Map feedback gains to the reduced-model coefficients."""
    vx, vp = gains.v_x, gains.v_p
    wt, gt, gmt = p.omega_T, p.gamma_T, d.g_MT
    chi = 0.25 * gt * (gt + 4.0 * vp) + wt * (wt - 2.0 * vx)
    if abs(chi) < 1e-6 * wt * wt:
        raise GainRegionError(
            f"near-singular gain combination: |chi| = {abs(chi):.3e} "
            f"< 1e-6 omega_T^2")
    c1 = (gmt / chi) * complex(vp + 0.5 * gt, -(wt - vx))
    c2 = (gmt / chi) * complex(vp, vx)
    xi_m = wt * np.conj(c2) * c1 - 1j * gmt * np.conj(c2)
    return ReducedCoeffs(
        C1=c1, C2=c2, chi=chi,
        alpha_x=c1 + np.conj(c2),
        alpha_p=-1j * c1 + 1j * np.conj(c2),
        xi_M=complex(xi_m), g_MT=gmt)


@dataclass(frozen=True)
class GainRegionReport:
    purpose: str
    ratios: tuple          # the three smallness ratios
    ratios_ok: bool
    in_window: bool
    window: tuple

    @property
    def ok(self):
        return self.ratios_ok and self.in_window


_WINDOWS = {"squeeze-x": (0.5, 1.0), "squeeze-p": (0.3, 0.5),
            "cool": (0.3, 1.0)}


def check_gain_region(gains, d, p, purpose, threshold=0.2):
    """Smallness ratios of the control-regime conditions plus membership in
    the purpose-specific sweep window (v_x pinned at omega_T/2)."""
    if purpose not in _WINDOWS:
        raise ValueError(f"unknown purpose {purpose!r}")
    vx, vp = gains.v_x, gains.v_p
    wt, gt, gmt, wm = p.omega_T, p.gamma_T, d.g_MT, p.omega_M
    chi = 0.25 * gt * (gt + 4.0 * vp) + wt * (wt - 2.0 * vx)
    r1 = gt / (gt + 4.0 * vp) if gt + 4.0 * vp > 0 else math.inf
    r2 = (wt - 2.0 * vx) / wt
    r3 = gt * gmt ** 2 * wt ** 2 / (wm * chi ** 2) if chi != 0 else math.inf
    ratios = (r1, r2, r3)
    ratios_ok = all(0.0 <= r < threshold for r in ratios)
    lo, hi = _WINDOWS[purpose]
    in_window = (abs(vx - 0.5 * wt) <= 1e-9 * wt
                 and lo - 1e-12 <= vp / wt <= hi + 1e-12)
    return GainRegionReport(purpose, ratios, ratios_ok, in_window, (lo, hi))


# ---------------------------------------------------------------------------
# conditional Gaussian moment flow

def moment_matrices(rc, d, p, gains):
    """Drift/diffusion/measurement matrices of the conditional moment flow.

    Returns (A, D, Ru, Iu, k_meas, Acl): conditional covariance obeys
    dS = AS + SA' + D - k K K' with K = 2 S Ru - Omega Iu; conditional means
    obey dm = Acl m + sqrt(k) K dW (the feedback drive enters only Acl).
    """
    c1, c2, xi = rc.C1, rc.C2, rc.xi_M
    wm, gm, nbar = p.omega_M, d.gamma_M, d.nbar_M
    gt, eta = p.gamma_T, p.eta
    G = np.array([[wm + 2.0 * xi.real, -2.0 * xi.imag],
                  [-2.0 * xi.imag, wm - 2.0 * xi.real]])
    gamma_eff = gm + gt * (abs(c1) ** 2 - abs(c2) ** 2)
    A = OMEGA2 @ G - 0.5 * gamma_eff * np.eye(2)
    imc = (c1 * np.conj(c2)).imag
    D = gm * (nbar + 0.5) * np.eye(2) + gt * np.array(
        [[abs(c1 - c2) ** 2 / 2.0, imc],
         [imc, abs(c1 + c2) ** 2 / 2.0]])
    u1 = (c1 + c2) / math.sqrt(2.0)
    u2 = 1j * (c1 - c2) / math.sqrt(2.0)
    Ru = np.array([u1.real, u2.real])
    Iu = np.array([u1.imag, u2.imag])
    k = eta * gt
    P = -gains.v_x * rc.alpha_x + gains.v_p * rc.alpha_p
    E = -1j * wm - 0.5 * gamma_eff + (-1j * np.conj(rc.alpha_x)) * P
    F = -2j * np.conj(xi) + (-1j * np.conj(rc.alpha_x)) * np.conj(P)
    Acl = np.array([[E.real + F.real, -E.imag + F.imag],
                    [E.imag + F.imag, E.real - F.real]])
    return A, D, Ru, Iu, k, Acl


@dataclass(frozen=True)
class FlowResult:
    mean_x: float
    mean_p: float
    V_x: float
    V_p: float
    C_xp: float
    V_mean_x: float
    V_mean_p: float
    C_mean: float
    steps: int
    converged: bool

    @property
    def nbar_cond(self):
        """Occupation carried by the conditional (quantum) variances."""
        return 0.5 * (self.V_x + self.V_p) - 0.5

    @property
    def nbar_total(self):
        """Full second-moment occupation: conditional + classical + mean."""
        return (self.nbar_cond
                + 0.5 * (self.V_mean_x + self.V_mean_p)
                + 0.5 * (self.mean_x ** 2 + self.mean_p ** 2))


def gaussian_moment_flow(gains, rc, d, p, x0=None, tol=1e-10,
                         dt_factor=0.01, max_windows=200.0, backend=None,
                         detach_channel=False):
    """Integrate the moment flow to stationarity.

    x0: optional start [mx, mp, Vx, Vp, Cxp, Wx, Wp, Wc] (default vacuum).
    detach_channel zeroes the collapse/measurement channel (C1 = C2 = 0),
    exposing the bare thermal fixed point.
    """
    if detach_channel:
        rc = ReducedCoeffs(C1=0j, C2=0j, chi=rc.chi, alpha_x=0j, alpha_p=0j,
                           xi_M=0j, g_MT=rc.g_MT)
    A, D, Ru, Iu, k, Acl = moment_matrices(rc, d, p, gains)
    w_fast = (p.omega_M + 2.0 * abs(rc.xi_M)
              + 4.0 * k * float(Ru @ Ru + Iu @ Iu) + d.gamma_M
              + p.gamma_T * (abs(rc.C1) ** 2 + abs(rc.C2) ** 2))
    h = dt_factor / w_fast
    win = max(int(round((1.0 / d.gamma_M) / h)), 8)
    max_steps = int(max_windows * win)
    if x0 is None:
        x0 = np.array([0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0])
    kern = get_backend(backend)
    s, steps, converged = kern.moment_flow(A, D, Ru, Iu, k, Acl,
                                           np.asarray(x0, dtype=float), h,
                                           win, tol, max_steps)
    if not np.all(np.isfinite(s)):
        raise FloatingPointError(
            "moment flow diverged (gains outside the stabilizing set)")
    return FlowResult(mean_x=s[0], mean_p=s[1], V_x=s[2], V_p=s[3],
                      C_xp=s[4], V_mean_x=s[5], V_mean_p=s[6], C_mean=s[7],
                      steps=int(steps), converged=bool(converged))


# ---------------------------------------------------------------------------
# closed-form stationary estimates

@dataclass(frozen=True)
class ClosedFormPrediction:
    xi: float               # tradeoff ratio from the exact two-photon rate
    xi_approx: float        # gain-quadratic approximation of the same ratio
    V_x_pred: float
    V_p_pred: float


def closed_form_prediction(gains, rc, d, p):
    """Stationary variance estimates from the tradeoff ratio.

    V_x = (1/2) sqrt(xi/eta), V_p = (1/2)/sqrt(xi eta), hbar = 1; their
    product is 1/(4 eta) identically. Raises when the exact two-photon rate
    puts the gain pair outside the formula's validity (xi <= 0).
    """
    wm = p.omega_M
    re_exact = rc.xi_M.real
    denom = wm + 2.0 * re_exact
    if denom <= 0 or wm - 2.0 * re_exact <= 0:
        raise GainRegionError(
            f"two-photon rate out of validity: 2|Re xi_M| = "
            f"{2 * abs(re_exact):.3e} exceeds omega_M = {wm:.3e}")
    xi = (wm - 2.0 * re_exact) / denom
    re_approx = (p.omega_T * rc.g_MT ** 2 / rc.chi ** 2
                 * (gains.v_p ** 2 - gains.v_x ** 2))
    xi_approx = (wm - 2.0 * re_approx) / (wm + 2.0 * re_approx) \
        if wm + 2.0 * re_approx > 0 else math.inf
    if xi <= 0:
        raise GainRegionError("tradeoff ratio is non-positive")
    eta = p.eta
    return ClosedFormPrediction(
        xi=xi, xi_approx=xi_approx,
        V_x_pred=0.5 * math.sqrt(xi / eta),
        V_p_pred=0.5 / math.sqrt(xi * eta))


# ---------------------------------------------------------------------------
# truncated-Fock conditional SME (oracle engine)

def quadratic_hamiltonian(levels, omega_m, xi_m):
    """H/hbar = w b†b + xi b² + xi* b†² on a truncated Fock space."""
    b = fock_annihilation(levels)
    bd = b.conj().T
    return omega_m * bd @ b + xi_m * b @ b + np.conj(xi_m) * bd @ bd


def reduced_propagator(levels, omega_m, xi_m, dt):
    from scipy.linalg import expm
    return expm(-1j * dt * quadratic_hamiltonian(levels, omega_m, xi_m))


def reduced_sme_trajectory(rho0, rc, d, p, gains, dt, steps, seed,
                           traj_index=0, record_stride=1, feedback=True,
                           propagator="splitstep", clamp_floor=-1e-8,
                           check_stride=1, backend=None):
    """One conditional trajectory of the reduced SME.

    Returns (rho_final, record, innovation, repairs); record columns are
    [t, dY, u, <x>, <p>, V_x, V_p, C_xp] at the given stride.
    """
    n = rho0.shape[0]
    use_euler = propagator == "euler"
    if propagator not in ("euler", "splitstep"):
        raise ValueError(f"unknown propagator {propagator!r}")
    U = None
    H0 = None
    if use_euler:
        H0 = quadratic_hamiltonian(n, p.omega_M, rc.xi_M)
    else:
        U = reduced_propagator(n, p.omega_M, rc.xi_M, dt)
    dW = rng.wiener_increments(seed, traj_index, steps, dt)
    n_samples = (steps + record_stride - 1) // record_stride \
        if record_stride > 0 else 0
    record = np.zeros((n_samples, 8))
    innovation = np.zeros((steps, 2))
    kern = get_backend(backend)
    rho, repairs = kern.reduced_sme_run(
        rho0, U, H0, use_euler, rc.C1, rc.C2,
        d.gamma_M * d.nbar_M, d.gamma_M * (d.nbar_M + 1.0), p.gamma_T,
        math.sqrt(p.eta * p.gamma_T), rc.alpha_x, rc.alpha_p,
        gains.v_x, gains.v_p, feedback, dt, dW, record_stride, clamp_floor,
        check_stride, record, innovation)
    return rho, record, innovation, repairs


def reduced_sme_step(rho, rc, d, p, gains, dW_value, dt, feedback=True,
                     propagator="euler", backend=None):
    """Single conditional update; returns (rho', dY)."""
    n = rho.shape[0]
    use_euler = propagator == "euler"
    U = None if use_euler else reduced_propagator(n, p.omega_M, rc.xi_M, dt)
    H0 = quadratic_hamiltonian(n, p.omega_M, rc.xi_M) if use_euler else None
    record = np.zeros((1, 8))
    innovation = np.zeros((1, 2))
    kern = get_backend(backend)
    rho1, _ = kern.reduced_sme_run(
        rho, U, H0, use_euler, rc.C1, rc.C2,
        d.gamma_M * d.nbar_M, d.gamma_M * (d.nbar_M + 1.0), p.gamma_T,
        math.sqrt(p.eta * p.gamma_T), rc.alpha_x, rc.alpha_p,
        gains.v_x, gains.v_p, feedback, dt,
        np.array([float(dW_value)]), 1, -1e-8, 1, record, innovation)
    return rho1, float(innovation[0, 0])
