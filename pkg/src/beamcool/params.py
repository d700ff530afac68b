"""Circuit parameters: derivation of frequencies, couplings and rates from raw
circuit quantities, with provenance-tracked overrides and regime validation.

All frequencies and rates are angular (rad/s) internally.
"""

import math
from dataclasses import dataclass, field, replace

from .constants import PHI0, HBAR, KB

TWO_PI = 2.0 * math.pi


class RegimeError(ValueError):
    """Raised when a derivation leaves the model's validity regime."""


@dataclass(frozen=True)
class PhysicalParams:
    """Raw circuit quantities (SI)."""
    L: float                 # loop inductance, H
    C_j: float               # junction capacitance, F (carried, unused after
                             # the two-level reduction; the source table's
                             # printed value is not physically plausible)
    I_c: float               # junction critical current, A
    m: float                 # beam mass, kg
    eta: float               # homodyne efficiency
    omega_M: float           # beam angular frequency, rad/s
    Bl: float                # field x beam length, T m
    Q: float                 # beam quality factor
    T_bath: float            # bath temperature, K
    phi_e: float             # normalized external flux offset
    gamma_S: float           # SQUID damping rate, rad/s
    gamma_T: float           # resonator damping rate, rad/s
    g_ST: float              # SQUID-resonator coupling, rad/s
    omega_T: float           # resonator angular frequency, rad/s
    M_phi: float = 1.0       # dephasing weight
    M_r: float = 1.0         # relaxation weight

    def __post_init__(self):
        for name in ("L", "I_c", "m", "omega_M", "Q", "T_bath",
                     "gamma_S", "gamma_T", "omega_T"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")


@dataclass(frozen=True)
class DerivedParams:
    """Derived quantities; `overridden` records which fields were pinned."""
    beta_L: float            # screening parameter
    U_0: float               # potential scale, J
    epsilon: float           # well asymmetry scale, rad/s
    Delta: float             # tunneling scale, rad/s
    omega_S: float           # qubit angular frequency, rad/s
    g_MS: float              # beam-SQUID coupling, rad/s
    g_MT: float              # effective beam-resonator coupling, rad/s
    gamma_M: float           # beam damping rate, rad/s
    nbar_M: float            # beam thermal occupation
    Delta_MS: float          # omega_S - omega_M, rad/s
    Delta_ST: float          # omega_S - omega_T, rad/s
    overridden: tuple = ()
    formula_values: dict = field(default_factory=dict)


def thermal_occupation(omega, T, convention="angular"):
    """Bose occupation at temperature T.

    convention "angular" uses hbar*omega; "linear" uses hbar*(omega/2pi),
    i.e. reads the quoted GHz figure as if it were already angular (the
    reading consistent with the quoted millikelvin effective temperatures).
    """
    if T <= 0:
        return 0.0
    w = omega if convention == "angular" else omega / TWO_PI
    x = HBAR * w / (KB * T)
    return 1.0 / math.expm1(x)


def derive_params(p, overrides=None, eq4_convention="energy",
                  nbar_convention="angular"):
    """Derive frequencies, couplings and rates from circuit quantities.

    Any entry of `overrides` (a mapping from DerivedParams field name to a
    value in rad/s or plain units) replaces the formula value; dependent
    quantities are recomputed from the overridden values. Formula values are
    kept in DerivedParams.formula_values for side-by-side reporting.
    """
    overrides = dict(overrides or {})

    beta_L = TWO_PI * p.L * p.I_c / PHI0
    if beta_L <= 1.0:
        raise RegimeError(
            f"beta_L = {beta_L:.4f} <= 1: two-level reduction invalid")
    U_0 = PHI0 ** 2 / (8.0 * math.pi * p.L)

    eps_energy = p.I_c * PHI0 * math.sqrt(6.0 * (beta_L - 1.0)) / math.pi
    delta_energy = 3.0 * U_0 * (1.0 - 1.0 / beta_L) ** 2
    if eq4_convention == "energy":
        epsilon = eps_energy / HBAR
        Delta = delta_energy / HBAR
    elif eq4_convention == "verbatim":
        # printed expressions taken at face value: the asymmetry scale already
        # carries 1/hbar, the tunneling scale does not
        epsilon = eps_energy / HBAR
        Delta = delta_energy
    else:
        raise ValueError(f"unknown eq4_convention {eq4_convention!r}")

    values = {"beta_L": beta_L, "U_0": U_0, "epsilon": epsilon, "Delta": Delta}
    values["omega_S"] = Delta
    # coupling formula is dimensionally consistent with the asymmetry scale
    # entering as an energy
    values["g_MS"] = (math.pi * eps_energy * p.Bl
                      / (PHI0 * math.sqrt(2.0 * HBAR * p.m * p.omega_M)))
    values["gamma_M"] = p.omega_M / p.Q
    values["nbar_M"] = thermal_occupation(p.omega_M, p.T_bath, nbar_convention)

    formula_values = dict(values)

    def resolved(name):
        return overrides.get(name, values[name])

    omega_S = resolved("omega_S")
    Delta_MS = omega_S - p.omega_M
    Delta_ST = omega_S - p.omega_T
    if Delta_MS <= 0 or Delta_ST <= 0:
        raise RegimeError(
            f"detunings must be positive: Delta_MS={Delta_MS:.3e}, "
            f"Delta_ST={Delta_ST:.3e}")
    g_MS = resolved("g_MS")
    g_MT_formula = g_MS * p.g_ST * (1.0 / Delta_MS + 1.0 / Delta_ST)
    formula_values["g_MT"] = g_MT_formula
    formula_values["Delta_MS"] = Delta_MS
    formula_values["Delta_ST"] = Delta_ST
    values["g_MT"] = g_MT_formula
    values["Delta_MS"] = Delta_MS
    values["Delta_ST"] = Delta_ST

    known = set(values)
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"unknown override keys: {sorted(unknown)}")
    values.update(overrides)

    return DerivedParams(
        beta_L=values["beta_L"], U_0=values["U_0"], epsilon=values["epsilon"],
        Delta=values["Delta"], omega_S=values["omega_S"], g_MS=values["g_MS"],
        g_MT=values["g_MT"], gamma_M=values["gamma_M"],
        nbar_M=values["nbar_M"], Delta_MS=values["Delta_MS"],
        Delta_ST=values["Delta_ST"],
        overridden=tuple(sorted(overrides)),
        formula_values=formula_values,
    )


@dataclass(frozen=True)
class RegimeCheck:
    name: str
    ok: bool
    ratio: float
    threshold: float
    sense: str   # "below" or "above"

    def describe(self):
        rel = "<" if self.sense == "below" else ">"
        flag = "pass" if self.ok else "FAIL"
        return (f"{self.name}: ratio {self.ratio:.4g} {rel} {self.threshold:g}"
                f" [{flag}]")


def validate_regime(p, d):
    """Dispersive, adiabatic-elimination and small-shift condition report."""
    checks = []

    def below(name, ratio, threshold):
        checks.append(RegimeCheck(name, ratio < threshold, ratio, threshold,
                                  "below"))

    def above(name, ratio, threshold):
        checks.append(RegimeCheck(name, ratio > threshold, ratio, threshold,
                                  "above"))

    below("dispersive beam-SQUID (g_MS/Delta_MS)", d.g_MS / d.Delta_MS, 0.1)
    below("dispersive SQUID-resonator (g_ST/Delta_ST)", p.g_ST / d.Delta_ST,
          0.1)
    slow = d.gamma_M * d.nbar_M
    above("fast SQUID decay (gamma_S/gamma_M nbar_M)",
          p.gamma_S / slow if slow > 0 else math.inf, 10.0)
    above("fast resonator decay (gamma_T/gamma_M nbar_M)",
          p.gamma_T / slow if slow > 0 else math.inf, 10.0)
    margin = d.beta_L - 1.0
    checks.append(RegimeCheck("shallow double well (beta_L - 1 in (0, 0.2))",
                              0.0 < margin < 0.2, margin, 0.2, "below"))
    w_min = min(p.omega_M, p.omega_T, d.omega_S)
    below("small shift g_MS^2/Delta_MS vs frequencies",
          d.g_MS ** 2 / d.Delta_MS / w_min, 0.05)
    below("small shift g_ST^2/Delta_ST vs frequencies",
          p.g_ST ** 2 / d.Delta_ST / w_min, 0.05)
    below("small swap coupling g_MT vs frequencies", d.g_MT / w_min, 0.05)
    return checks


def regime_report(checks):
    lines = [c.describe() for c in checks]
    lines.append("all checks pass" if all(c.ok for c in checks)
                 else "REGIME WARNINGS PRESENT")
    return "\n".join(lines)


def with_override(d, **kwargs):
    """Functional update of a DerivedParams record."""
    over = set(d.overridden) | set(kwargs)
    return replace(d, overridden=tuple(sorted(over)), **kwargs)
