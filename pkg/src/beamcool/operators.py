"""Dense operator algebra on truncated Hilbert spaces.

Conventions: all operators are dense complex128 numpy arrays; composite
states live on beam (x) qubit (x) resonator in that fixed factor order;
quadratures use hbar = 1, i.e. x = (b + b†)/sqrt(2) scaled so the vacuum
variance is 1/2.
"""

from dataclasses import dataclass

import numpy as np

SLOTS = ("beam", "qubit", "tlr")


@dataclass(frozen=True)
class HilbertSpace:
    """Truncations of the beam (x) qubit (x) resonator product space."""
    n_beam: int
    n_tlr: int
    n_qubit: int = 2

    def __post_init__(self):
        if self.n_beam < 2 or self.n_tlr < 2:
            raise ValueError("Fock truncations must be at least 2 levels")
        if self.n_qubit != 2:
            raise ValueError("the qubit factor is fixed at 2 levels")

    @property
    def dims(self):
        return (self.n_beam, self.n_qubit, self.n_tlr)

    @property
    def dim(self):
        return self.n_beam * self.n_qubit * self.n_tlr


def fock_annihilation(levels):
    """Lowering operator with sqrt(n) on the first superdiagonal."""
    if levels < 2:
        raise ValueError(f"need at least 2 levels, got {levels}")
    return np.diag(np.sqrt(np.arange(1.0, levels)), 1).astype(complex)


def pauli(which):
    """Standard 2x2 Pauli matrices; sigma_pm = (sigma_x +- i sigma_y)/2."""
    mats = {
        "x": np.array([[0, 1], [1, 0]], dtype=complex),
        "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "z": np.array([[1, 0], [0, -1]], dtype=complex),
        "plus": np.array([[0, 1], [0, 0]], dtype=complex),
        "minus": np.array([[0, 0], [1, 0]], dtype=complex),
    }
    try:
        return mats[which]
    except KeyError:
        raise ValueError(f"unknown Pauli label {which!r}") from None


def embed(op, slot, space):
    """Kronecker-embed a single-factor operator into the full product space."""
    if slot not in SLOTS:
        raise ValueError(f"unknown slot {slot!r}, expected one of {SLOTS}")
    dims = space.dims
    idx = SLOTS.index(slot)
    if op.shape != (dims[idx], dims[idx]):
        raise ValueError(
            f"operator shape {op.shape} does not match {slot} dimension {dims[idx]}")
    out = np.array([[1.0 + 0j]])
    for k, d in enumerate(dims):
        out = np.kron(out, op if k == idx else np.eye(d, dtype=complex))
    return out


def dissipator(c, rho):
    """Lindblad term c rho c† - (c†c rho + rho c†c)/2."""
    if c.shape != rho.shape:
        raise ValueError(f"shape mismatch: {c.shape} vs {rho.shape}")
    cdc = c.conj().T @ c
    return c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc)


def meas_superop(c, rho):
    """Homodyne back-action term c rho + rho c† - <c + c†> rho."""
    if c.shape != rho.shape:
        raise ValueError(f"shape mismatch: {c.shape} vs {rho.shape}")
    ex = np.trace(c @ rho) + np.trace(rho @ c.conj().T)
    return c @ rho + rho @ c.conj().T - ex.real * rho


def expectation(op, rho):
    """tr(op rho)."""
    if op.shape != rho.shape:
        raise ValueError(f"shape mismatch: {op.shape} vs {rho.shape}")
    return np.trace(op @ rho)


def partial_trace(rho, keep, space):
    """Reduced density matrix over the slots in `keep` (set or single name)."""
    if isinstance(keep, str):
        keep = (keep,)
    keep_idx = []
    for slot in keep:
        if slot not in SLOTS:
            raise ValueError(f"unknown slot {slot!r}")
        keep_idx.append(SLOTS.index(slot))
    keep_idx = sorted(set(keep_idx))
    dims = space.dims
    t = rho.reshape(dims + dims)
    # trace out unkept factors from the highest index down so that the
    # remaining (row, column) axis pairing stays at an offset of ndim/2
    for ax in reversed(range(3)):
        if ax not in keep_idx:
            t = np.trace(t, axis1=ax, axis2=ax + t.ndim // 2)
    d = int(np.prod([dims[i] for i in keep_idx])) if keep_idx else 1
    return t.reshape(d, d)


# ---------------------------------------------------------------------------
# state constructors

def fock_state(levels, n):
    if not 0 <= n < levels:
        raise ValueError(f"Fock index {n} outside truncation {levels}")
    rho = np.zeros((levels, levels), dtype=complex)
    rho[n, n] = 1.0
    return rho


def thermal_state(levels, nbar):
    """Truncated thermal state, renormalized on the truncated space."""
    if nbar < 0:
        raise ValueError("mean occupation must be nonnegative")
    if nbar == 0:
        return fock_state(levels, 0)
    p = (nbar / (1.0 + nbar)) ** np.arange(levels)
    p /= p.sum()
    return np.diag(p).astype(complex)


def coherent_state(levels, alpha):
    """Truncated coherent state |alpha><alpha| (renormalized)."""
    n = np.arange(levels)
    from scipy.special import gammaln
    logc = n * np.log(np.abs(alpha) + 1e-300) - 0.5 * gammaln(n + 1.0)
    amp = np.exp(logc - 0.5 * np.abs(alpha) ** 2) * np.exp(1j * n * np.angle(alpha))
    amp /= np.linalg.norm(amp)
    return np.outer(amp, amp.conj())


def displacement(levels, alpha):
    """Truncated displacement operator exp(alpha b† - alpha* b)."""
    from scipy.linalg import expm
    b = fock_annihilation(levels)
    return expm(alpha * b.conj().T - np.conj(alpha) * b)


def squeeze_operator(levels, zeta):
    """Truncated squeeze operator exp((zeta* b² - zeta b†²)/2)."""
    from scipy.linalg import expm
    b = fock_annihilation(levels)
    return expm(0.5 * (np.conj(zeta) * b @ b - zeta * b.conj().T @ b.conj().T))


def gaussian_state(levels, mean, cov):
    """Single-mode Gaussian state with quadrature mean (x, p) and covariance.

    cov is the symmetrized 2x2 covariance in hbar = 1 units (vacuum = I/2).
    Built as displaced-squeezed-thermal: D S rho_th S† D†.
    """
    cov = np.asarray(cov, dtype=float)
    det = np.linalg.det(cov)
    if det < 0.25 * (1 - 1e-9):
        raise ValueError(f"covariance below the Heisenberg floor: det={det}")
    nu = np.sqrt(max(det, 0.25))            # symplectic eigenvalue
    n_th = max(nu - 0.5, 0.0)
    # principal axes: cov = R diag(nu e^{2r}, nu e^{-2r}) R^T
    w, v = np.linalg.eigh(cov)
    r = 0.25 * np.log(w[1] / w[0])          # w ascending: w1 = nu e^{2r}
    theta = np.arctan2(v[1, 1], v[0, 1])    # angle of the major axis
    # squeeze along rotated axis: zeta = r e^{2i theta} squeezes the
    # quadrature at angle theta+pi/2 and stretches the one at theta
    zeta = -r * np.exp(2j * theta)
    S = squeeze_operator(levels, zeta)
    rho = S @ thermal_state(levels, n_th) @ S.conj().T
    alpha = (mean[0] + 1j * mean[1]) / np.sqrt(2.0)
    D = displacement(levels, alpha)
    rho = D @ rho @ D.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


# ---------------------------------------------------------------------------
# diagnostics and repair

def hermitize(rho):
    return 0.5 * (rho + rho.conj().T)


def top_level_population(rho):
    """Population of the top two levels (truncation-leakage indicator)."""
    return float(rho[-1, -1].real + rho[-2, -2].real)


def clamp_negative_eigenvalues(rho, floor=-1e-8):
    """Zero out eigenvalues below `floor` and renormalize the trace.

    Returns (rho, repaired) where repaired says whether clamping happened.
    """
    w, v = np.linalg.eigh(hermitize(rho))
    if w[0] >= floor:
        return rho / np.trace(rho).real, False
    w = np.where(w < floor, 0.0, w)
    rho = (v * w) @ v.conj().T
    return rho / np.trace(rho).real, True


def density_diagnostics(rho):
    """Hermiticity defect, trace, minimum eigenvalue of a candidate state."""
    herm = np.linalg.norm(rho - rho.conj().T) / max(np.linalg.norm(rho), 1e-300)
    tr = np.trace(rho).real
    lam_min = float(np.linalg.eigvalsh(hermitize(rho))[0])
    return {"hermiticity_defect": float(herm), "trace": float(tr),
            "lambda_min": lam_min}


def quadrature_ops(levels):
    """x = (b+b†)/sqrt(2), p = i(b†-b)/sqrt(2) on a truncated Fock space."""
    b = fock_annihilation(levels)
    bd = b.conj().T
    x = (b + bd) / np.sqrt(2.0)
    p = 1j * (bd - b) / np.sqrt(2.0)
    return x, p
