"""Beam observables and ensemble statistics: conditional variances, the
occupation-number decomposition over the measurement noise, effective
temperatures under both frequency conventions, and uncertainty bookkeeping.
"""

import math
from dataclasses import dataclass

import numpy as np

from .constants import HBAR, KB
from .operators import fock_annihilation, partial_trace

TWO_PI = 2.0 * math.pi


def beam_moments(rho, space=None):
    """(<x>, <p>, V_x, V_p, C_xp) of the beam mode, hbar = 1.

    Accepts a beam-only state or a full product state (space given).
    """
    if space is not None:
        rho = partial_trace(rho, "beam", space)
    n = rho.shape[0]
    b = fock_annihilation(n)
    exb = np.trace(b @ rho)
    exn = float(np.sum(np.arange(n) * np.diagonal(rho).real))
    exbb = np.trace(b @ b @ rho)
    ex_x = math.sqrt(2.0) * exb.real
    ex_p = math.sqrt(2.0) * exb.imag
    v_x = exn + 0.5 + exbb.real - ex_x ** 2
    v_p = exn + 0.5 - exbb.real - ex_p ** 2
    c_xp = exbb.imag - ex_x * ex_p
    return ex_x, ex_p, v_x, v_p, c_xp


def conditional_variances(rho, space=None):
    """(V_x, V_p) of the beam from a conditional state."""
    _, _, v_x, v_p, _ = beam_moments(rho, space)
    if v_x < -1e-10 or v_p < -1e-10:
        raise ValueError(f"negative variance: {v_x}, {v_p}")
    return v_x, v_p


@dataclass(frozen=True)
class EnsembleStats:
    mean_xM: float
    mean_pM: float
    V_xM: float               # ensemble-averaged conditional variances
    V_pM: float
    V_mean_xM: float          # classical variances of conditional means
    V_mean_pM: float
    nbar: float
    Teff_angular: float
    Teff_linear: float
    n_traj: int
    se: dict                  # jackknife standard errors by field name


def _nbar_from_parts(ex_x, ex_p, v_x, v_p):
    mx, mp_ = ex_x.mean(), ex_p.mean()
    vmx = ex_x.var(ddof=1) if ex_x.size > 1 else 0.0
    vmp = ex_p.var(ddof=1) if ex_p.size > 1 else 0.0
    return (0.5 * (v_x.mean() + v_p.mean()) - 0.5
            + 0.5 * (vmx + vmp) + 0.5 * (mx ** 2 + mp_ ** 2))


def ensemble_reduce(moments, omega_M, warn_below=30):
    """Reduce per-trajectory beam moments to ensemble statistics.

    moments: array (n_traj, >=4) with columns [<x>, <p>, V_x, V_p] taken at
    a common time. The occupation estimate follows the decomposition
    nbar = (V_x+V_p)/2 - 1/2 + (V_<x>+V_<p>)/2 + (xbar²+pbar²)/2 with all
    expectations over the noise realizations; standard errors are delete-one
    jackknife estimates.
    """
    moments = np.asarray(moments, dtype=float)
    n = moments.shape[0]
    if n < 2:
        raise ValueError("need at least two trajectories")
    ex_x, ex_p, v_x, v_p = (moments[:, 0], moments[:, 1], moments[:, 2],
                            moments[:, 3])
    nbar = _nbar_from_parts(ex_x, ex_p, v_x, v_p)

    fields = {
        "mean_xM": lambda idx: ex_x[idx].mean(),
        "mean_pM": lambda idx: ex_p[idx].mean(),
        "V_xM": lambda idx: v_x[idx].mean(),
        "V_pM": lambda idx: v_p[idx].mean(),
        "V_mean_xM": lambda idx: ex_x[idx].var(ddof=1),
        "V_mean_pM": lambda idx: ex_p[idx].var(ddof=1),
        "nbar": lambda idx: _nbar_from_parts(ex_x[idx], ex_p[idx], v_x[idx],
                                             v_p[idx]),
    }
    se = {}
    all_idx = np.arange(n)
    for name, fn in fields.items():
        full = fn(all_idx)
        loo = np.array([fn(np.delete(all_idx, i)) for i in range(n)])
        se[name] = float(math.sqrt(max((n - 1) / n
                                       * np.sum((loo - loo.mean()) ** 2),
                                       0.0)))
    stats = EnsembleStats(
        mean_xM=float(ex_x.mean()), mean_pM=float(ex_p.mean()),
        V_xM=float(v_x.mean()), V_pM=float(v_p.mean()),
        V_mean_xM=float(ex_x.var(ddof=1)), V_mean_pM=float(ex_p.var(ddof=1)),
        nbar=float(nbar),
        Teff_angular=effective_temperature(max(nbar, 1e-12), omega_M,
                                           "angular"),
        Teff_linear=effective_temperature(max(nbar, 1e-12), omega_M,
                                          "linear"),
        n_traj=n, se=se)
    if n < warn_below:
        import warnings
        warnings.warn(f"only {n} trajectories; standard errors are unreliable",
                      stacklevel=2)
    return stats


def effective_temperature(nbar, omega_M, convention="angular"):
    """Temperature whose Bose occupation at the beam frequency equals nbar.

    convention "angular" uses hbar*omega_M (physically standard); "linear"
    uses hbar*(omega_M/2pi), the reading that reproduces the quoted
    millikelvin figures.
    """
    if nbar <= 0:
        raise ValueError("nbar must be positive")
    w = omega_M if convention == "angular" else omega_M / TWO_PI
    return HBAR * w / (KB * math.log((nbar + 1.0) / nbar))


def occupation_from_temperature(T, omega_M, convention="angular"):
    w = omega_M if convention == "angular" else omega_M / TWO_PI
    return 1.0 / math.expm1(HBAR * w / (KB * T))


@dataclass(frozen=True)
class UncertaintyReport:
    product: float
    classification: str
    squeeze_x: bool
    squeeze_p: bool


def uncertainty_product(V_x, V_p, eta=None, tol=1e-8):
    """Product of beam variances (units hbar²) with a qualitative class.

    below-heisenberg flags an invalid conditional state; the measurement
    floor is 1/(4 eta) when eta is given.
    """
    if V_x < 0 or V_p < 0:
        raise ValueError("variances must be nonnegative")
    prod = V_x * V_p
    floor = 0.25 if eta is None else 0.25 / eta
    if prod < 0.25 - tol:
        cls = "below-heisenberg"
    elif prod <= 2.0 * floor:
        cls = "near-measurement-floor"
    else:
        cls = "thermal-scale"
    return UncertaintyReport(product=prod, classification=cls,
                             squeeze_x=V_x < 0.5, squeeze_p=V_p < 0.5)
