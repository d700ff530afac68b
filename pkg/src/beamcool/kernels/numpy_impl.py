"""Pure-numpy reference implementations of the hot kernels.

Semantically identical to the numba backend; used when numba is unavailable
or when BEAMCOOL_BACKEND=numpy is set. Ladder-operator products are applied
as index-shifted elementwise updates rather than dense matrix products.
"""

import numpy as np

BACKEND_NAME = "numpy"


# ---------------------------------------------------------------------------
# Gaussian moment flow (conditional Riccati + classical Lyapunov + means)

def moment_flow(A, D, Ru, Iu, k_meas, Acl, state0, h, win_steps, tol,
                max_steps):
    """RK4-integrate conditional/classical second moments and the mean.

    state layout: [mx, mp, Vx, Vp, Cxp, Wx, Wp, Wc]; converged when every
    component changes by less than tol (relative) over one window.
    """
    s = np.asarray(state0, dtype=float).copy()
    oix, oip = Iu[1], -Iu[0]            # Omega @ Iu
    a11, a12, a21, a22 = A[0, 0], A[0, 1], A[1, 0], A[1, 1]
    b11, b12, b21, b22 = Acl[0, 0], Acl[0, 1], Acl[1, 0], Acl[1, 1]
    dxx, dxp, dpp = D[0, 0], D[0, 1], D[1, 1]
    rx, rp = Ru[0], Ru[1]
    k = k_meas

    def rhs(st):
        mx, mp_, vx, vp, c, wx, wp, wc = st
        kx = 2.0 * (vx * rx + c * rp) - oix
        kp = 2.0 * (c * rx + vp * rp) - oip
        return np.array([
            b11 * mx + b12 * mp_,
            b21 * mx + b22 * mp_,
            2.0 * (a11 * vx + a12 * c) + dxx - k * kx * kx,
            2.0 * (a21 * c + a22 * vp) + dpp - k * kp * kp,
            a11 * c + a12 * vp + a21 * vx + a22 * c + dxp - k * kx * kp,
            2.0 * (b11 * wx + b12 * wc) + k * kx * kx,
            2.0 * (b21 * wc + b22 * wp) + k * kp * kp,
            b11 * wc + b12 * wp + b21 * wx + b22 * wc + k * kx * kp,
        ])

    prev = np.full(8, np.inf)
    steps = 0
    converged = False
    while steps < max_steps and not converged:
        for _ in range(win_steps):
            k1 = rhs(s)
            k2 = rhs(s + 0.5 * h * k1)
            k3 = rhs(s + 0.5 * h * k2)
            k4 = rhs(s + h * k3)
            s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            steps += 1
            if steps >= max_steps:
                break
        ref = np.maximum(np.abs(s), 1e-3)
        if np.all(np.abs(s - prev) <= tol * ref):
            converged = True
        prev = s.copy()
    return s, steps, converged


# ---------------------------------------------------------------------------
# ladder-shift helpers (single mode)

def _b_rho(rho, sq):
    out = np.zeros_like(rho)
    out[:-1, :] = sq[1:, None] * rho[1:, :]
    return out


def _rho_bd(rho, sq):
    out = np.zeros_like(rho)
    out[:, :-1] = rho[:, 1:] * sq[None, 1:]
    return out


def _bd_rho(rho, sq):
    out = np.zeros_like(rho)
    out[1:, :] = sq[1:, None] * rho[:-1, :]
    return out


def _rho_b(rho, sq):
    out = np.zeros_like(rho)
    out[:, 1:] = rho[:, :-1] * sq[None, 1:]
    return out


def _posdef_check(rho, floor):
    try:
        np.linalg.cholesky(rho + (-floor) * np.eye(rho.shape[0]))
        return True
    except np.linalg.LinAlgError:
        return False


def _clamp(rho, floor):
    w, v = np.linalg.eigh(rho)
    w = np.where(w < floor, 0.0, w)
    rho = (v * w) @ v.conj().T
    return rho


def reduced_sme_run(rho0, U, H0, use_euler, c1, c2, gm_up, gm_down, gamma_t,
                    sqrt_eta_gt, alpha_x, alpha_p, vx, vp, feedback_on,
                    dt, dW, record_stride, clamp_floor, check_stride,
                    record_out, innovation_out):
    """Beam-only conditional SME trajectory.

    record_out: (n_samples, 8) buffer -> [t, dY, u, <x>, <p>, Vx, Vp, Cxp]
    innovation_out: (n_steps, 2) buffer -> [dY, signal_dt]
    Returns (rho_final, repairs).
    """
    n = rho0.shape[0]
    rho = rho0.astype(complex).copy()
    sq = np.sqrt(np.arange(n, dtype=float))
    nvec = np.arange(n, dtype=float)
    isq2 = 1.0 / np.sqrt(2.0)

    # c†c = |C1|² b†b + |C2|² b b† + (C1* C2) b†b† + (C2* C1) b b
    # as diagonal d plus a 2-superdiagonal t (Hermitian closure below)
    bbd_diag = nvec + 1.0
    bbd_diag[-1] = 0.0              # truncated b b† vanishes at the top level
    d_cc = (abs(c1) ** 2) * nvec + (abs(c2) ** 2) * bbd_diag
    t_cc = np.zeros(n, dtype=complex)
    t_cc[:-2] = np.conj(c2) * c1 * sq[1:-1] * sq[2:]   # (bb)_{i,i+2}
    # thermal anticommutator diagonals
    d_th = gm_down * nvec + gm_up * bbd_diag

    steps = dW.shape[0]
    repairs = 0
    sample = 0
    for i in range(steps):
        exb = np.sum(sq[1:] * np.diagonal(rho, -1))      # tr(b rho)
        ex_ox = 2.0 * (alpha_x * exb).real
        ex_op = 2.0 * (alpha_p * exb).real
        u = (-vx * ex_ox + vp * ex_op) if feedback_on else 0.0
        signal = sqrt_eta_gt * ex_ox * dt
        dy = signal + dW[i]
        innovation_out[i, 0] = dy
        innovation_out[i, 1] = signal

        if record_stride > 0 and i % record_stride == 0:
            ex_x = np.sqrt(2.0) * exb.real
            ex_p = np.sqrt(2.0) * exb.imag
            exn = np.sum(nvec * np.diagonal(rho).real)
            exbb = np.sum(sq[1:-1] * sq[2:] * np.diagonal(rho, -2))
            vx_q = exn + 0.5 + exbb.real - ex_x * ex_x
            vp_q = exn + 0.5 - exbb.real - ex_p * ex_p
            cxp = exbb.imag - ex_x * ex_p
            record_out[sample, 0] = i * dt
            record_out[sample, 1] = dy
            record_out[sample, 2] = u
            record_out[sample, 3] = ex_x
            record_out[sample, 4] = ex_p
            record_out[sample, 5] = vx_q
            record_out[sample, 6] = vp_q
            record_out[sample, 7] = cxp
            sample += 1

        b_r = _b_rho(rho, sq)
        bd_r = _bd_rho(rho, sq)
        r_b = _rho_b(rho, sq)
        r_bd = _rho_bd(rho, sq)

        drho = gm_down * _rho_bd(b_r, sq)                # b rho b†
        drho += gm_up * _rho_b(bd_r, sq)                 # b† rho b
        drho -= 0.5 * (d_th[:, None] + d_th[None, :]) * rho

        # collapse channel c = C1 b + C2 b†
        drho += gamma_t * (
            (abs(c1) ** 2) * _rho_bd(b_r, sq)
            + (np.conj(c2) * c1) * _rho_b(b_r, sq)       # b rho b
            + (c2 * np.conj(c1)) * _rho_bd(bd_r, sq)     # b† rho b†
            + (abs(c2) ** 2) * _rho_b(bd_r, sq)
        )
        acc = (d_cc[:, None] + d_cc[None, :]) * rho
        acc[:-2, :] += t_cc[:-2, None] * rho[2:, :]
        acc[2:, :] += np.conj(t_cc[:-2, None]) * rho[:-2, :]
        acc[:, 2:] += t_cc[None, :-2] * rho[:, :-2]
        acc[:, :-2] += np.conj(t_cc[None, :-2]) * rho[:, 2:]
        drho -= 0.5 * gamma_t * acc

        if use_euler:
            # -i [H0, rho] with H0 = w b†b + xi b² + xi* b†² folded into
            # dense arrays outside; here H0 given explicitly
            drho += -1j * (H0 @ rho - rho @ H0)
        if feedback_on and u != 0.0:
            ox_r = alpha_x * b_r + np.conj(alpha_x) * bd_r
            r_ox = alpha_x * r_b + np.conj(alpha_x) * r_bd
            drho += -1j * u * (ox_r - r_ox)

        c_r = c1 * b_r + c2 * bd_r
        r_cd = np.conj(c1) * r_bd + np.conj(c2) * r_b
        rho = rho + dt * drho + sqrt_eta_gt * dW[i] * (c_r + r_cd - ex_ox * rho)

        if not use_euler:
            rho = U @ rho @ U.conj().T

        rho = 0.5 * (rho + rho.conj().T)
        if check_stride > 0 and i % check_stride == 0:
            if not _posdef_check(rho, clamp_floor):
                rho = _clamp(rho, clamp_floor)
                repairs += 1
        tr = np.trace(rho).real
        if not np.isfinite(tr) or tr <= 0:
            raise FloatingPointError(f"state blow-up at step {i}")
        rho /= tr
    return rho, repairs


# ---------------------------------------------------------------------------
# semiclassical estimator (Maxwell-Bloch filter + resonator second moments)

def filter_step(f, pars, u, dw, dt):
    """One Euler-Maruyama step of the ten-component filter state.

    f: [sx, sy, sz, reb, imb, rea, ima, VxT, VpT, CxTpT]
    pars: [omega_S, omega_M, omega_T, g_MT, gamma_M, gamma_S, gamma_T,
           M_phi, M_r, eta]
    """
    (omega_S, omega_M, omega_T, g_mt, gamma_M, gamma_S, gamma_T,
     M_phi, M_r, eta) = pars
    sx, sy, sz, reb, imb, rea, ima, vxt, vpt, cxp = f
    gdeph = 2.0 * gamma_S * (M_phi ** 2 + 0.25 * M_r ** 2)
    grel = gamma_S * M_r ** 2
    b = reb + 1j * imb
    a = rea + 1j * ima
    db = (-1j * omega_M - 0.5 * gamma_M) * b + g_mt * sz * a
    da = ((-1j * omega_T - 0.5 * gamma_T) * a - g_mt * sz * b - 1j * u)
    noise_a = np.sqrt(eta * gamma_T) * (vxt + 1j * cxp - 0.5) * dw
    dvx = (-gamma_T * vxt + 2.0 * omega_T * cxp + 0.5 * gamma_T
           - 2.0 * eta * gamma_T * (vxt - 0.5) ** 2)
    dvp = (-gamma_T * vpt - 2.0 * omega_T * cxp + 0.5 * gamma_T
           - 2.0 * eta * gamma_T * cxp ** 2)
    dc = (-gamma_T * cxp + omega_T * (vpt - vxt)
          - 2.0 * eta * gamma_T * (vxt - 0.5) * cxp)
    out = np.empty(10)
    out[0] = sx + dt * (-omega_S * sy - gdeph * sx)
    out[1] = sy + dt * (omega_S * sx - gdeph * sy)
    out[2] = sz + dt * (-grel * (sz + 1.0))
    bn = b + dt * db
    an = a + dt * da + noise_a
    out[3], out[4] = bn.real, bn.imag
    out[5], out[6] = an.real, an.imag
    out[7] = vxt + dt * dvx
    out[8] = vpt + dt * dvp
    out[9] = cxp + dt * dc
    return out


def feedback_from_filter(f, vx, vp):
    """u = -2 v_x Re<a> + 2 v_p Im<a> (gain law on resonator quadratures)."""
    return -2.0 * vx * f[5] + 2.0 * vp * f[6]


def filter_selfloop_run(f0, pars, vx, vp, feedback_on, dt, dW, record_stride,
                        record_out):
    """Filter driven by its own innovation; records the closed-loop series.

    record_out: (n_samples, 13) -> [t, sx, sy, sz, reb, imb, rea, ima,
                                    VxT, VpT, CxTpT, u, dY]
    """
    f = np.asarray(f0, dtype=float).copy()
    eta, gamma_T = pars[9], pars[6]
    sqeg = np.sqrt(eta * gamma_T)
    sample = 0
    for i in range(dW.shape[0]):
        u = feedback_from_filter(f, vx, vp) if feedback_on else 0.0
        dy = sqeg * 2.0 * f[5] * dt + dW[i]
        if record_stride > 0 and i % record_stride == 0:
            record_out[sample, 0] = i * dt
            record_out[sample, 1:11] = f
            record_out[sample, 11] = u
            record_out[sample, 12] = dy
            sample += 1
        f = filter_step(f, pars, u, dW[i], dt)
        if not np.all(np.isfinite(f)):
            raise FloatingPointError(f"filter blow-up at step {i}")
    return f


# ---------------------------------------------------------------------------
# full three-body conditional SME

def _csr_dense(data, indices, indptr, x, out):
    """out = A @ x for CSR A and dense x."""
    n = indptr.shape[0] - 1
    out[:] = 0.0
    for row in range(n):
        acc = np.zeros(x.shape[1], dtype=complex)
        for k in range(indptr[row], indptr[row + 1]):
            acc += data[k] * x[indices[k], :]
        out[row, :] = acc
    return out


def full_sme_run(rho0, u_data, u_indices, u_indptr, h_data, h_indices,
                 h_indptr, use_euler, nb, nt, gm_up, gm_down, gs_phi, gs_r,
                 gamma_t, sqrt_eta_gt, filter_pars, f0, vx, vp,
                 controller_kind, dt, dW, record_stride, clamp_floor,
                 check_stride, renorm_stride, record_out, innovation_out,
                 filter_out):
    """Conditional SME for beam (x) qubit (x) resonator with an estimator in
    the loop.

    controller_kind: 0 none (u=0), 1 estimator feedback.
    record_out: (n_samples, 11) -> [t, dY, u, <x_M>, <p_M>, V_xM, V_pM,
                                    <x_T>, <p_T>, <sz>, repairs]
    filter_out: (n_samples, 10) filter state samples.
    Returns (rho_final, f_final, repairs).
    """
    d = rho0.shape[0]
    rho = rho0.astype(complex).copy()
    f = np.asarray(f0, dtype=float).copy()

    shape = (nb, 2, nt)
    sqb = np.sqrt(np.arange(nb, dtype=float))
    sqa = np.sqrt(np.arange(nt, dtype=float))
    nbv = np.arange(nb, dtype=float)
    nav = np.arange(nt, dtype=float)
    szv = np.array([1.0, -1.0])

    # diagonal of the total anticommutator: thermal beam + qubit relax + tlr
    bbd = nbv + 1.0
    bbd[-1] = 0.0                   # truncated b b† vanishes at the top level
    diag = (gm_down * nbv[:, None, None] + gm_up * bbd[:, None, None]
            + gs_r * np.array([1.0, 0.0])[None, :, None]
            + gamma_t * nav[None, None, :])
    diag = np.broadcast_to(diag, shape).reshape(d)
    sz_full = np.broadcast_to(szv[None, :, None], shape).reshape(d)

    def t6(r):
        return r.reshape(nb, 2, nt, nb, 2, nt)

    tmp = np.empty_like(rho)
    tmp2 = np.empty_like(rho)

    steps = dW.shape[0]
    repairs = 0
    sample = 0
    eta, gamma_T_f = filter_pars[9], filter_pars[6]
    for i in range(steps):
        r6 = t6(rho)
        # tr(a rho): first superdiagonal of the reduced tlr factor
        dtrace = np.einsum("bqibqj->ij", r6)
        ex_a = np.sum(sqa[1:] * np.diagonal(dtrace, -1))
        ex_xt2 = 2.0 * ex_a.real
        signal = sqrt_eta_gt * ex_xt2 * dt
        dy = signal + dW[i]
        innovation_out[i, 0] = dy
        innovation_out[i, 1] = signal

        if controller_kind == 1:
            u = feedback_from_filter(f, vx, vp)
        else:
            u = 0.0

        if record_stride > 0 and i % record_stride == 0:
            btrace = np.einsum("iqkjqk->ij", r6)
            ex_b = np.sum(sqb[1:] * np.diagonal(btrace, -1))
            ex_bb = np.sum(sqb[1:-1] * sqb[2:] * np.diagonal(btrace, -2))
            ex_n = np.sum(nbv * np.diagonal(btrace).real)
            ex_x = np.sqrt(2.0) * ex_b.real
            ex_p = np.sqrt(2.0) * ex_b.imag
            record_out[sample, 0] = i * dt
            record_out[sample, 1] = dy
            record_out[sample, 2] = u
            record_out[sample, 3] = ex_x
            record_out[sample, 4] = ex_p
            record_out[sample, 5] = ex_n + 0.5 + ex_bb.real - ex_x ** 2
            record_out[sample, 6] = ex_n + 0.5 - ex_bb.real - ex_p ** 2
            record_out[sample, 7] = np.sqrt(2.0) * ex_a.real
            record_out[sample, 8] = np.sqrt(2.0) * ex_a.imag
            record_out[sample, 9] = np.sum(sz_full * np.diagonal(rho).real)
            record_out[sample, 10] = repairs
            filter_out[sample, :] = f
            sample += 1

        # dissipative part, elementwise in the tensor index
        drho = np.zeros_like(r6)
        # beam losses: b rho b†
        drho[:-1, :, :, :-1, :, :] += (gm_down * sqb[1:, None, None, None, None, None]
                                       * sqb[None, None, None, 1:, None, None]
                                       * r6[1:, :, :, 1:, :, :])
        # beam thermal gain: b† rho b
        drho[1:, :, :, 1:, :, :] += (gm_up * sqb[1:, None, None, None, None, None]
                                     * sqb[None, None, None, 1:, None, None]
                                     * r6[:-1, :, :, :-1, :, :])
        # qubit lowering s- rho s+: ground sector (index 1) fed from excited
        drho[:, 1, :, :, 1, :] += gs_r * r6[:, 0, :, :, 0, :]
        # qubit dephasing: gs_phi (sz rho sz - rho)
        spar = szv[None, :, None, None, None, None] * szv[None, None, None, None, :, None]
        drho += gs_phi * (spar - 1.0) * r6
        # resonator decay: a rho a†
        drho[:, :, :-1, :, :, :-1] += (gamma_t * sqa[None, None, 1:, None, None, None]
                                       * sqa[None, None, None, None, None, 1:]
                                       * r6[:, :, 1:, :, :, 1:])
        drho = drho.reshape(d, d)
        drho -= 0.5 * (diag[:, None] + diag[None, :]) * rho

        # drive u(t)(a + a†): -i u [a + a†, rho]
        if u != 0.0:
            x6 = np.zeros_like(r6)
            x6[:, :, :-1, :, :, :] += sqa[None, None, 1:, None, None, None] \
                * r6[:, :, 1:, :, :, :]
            x6[:, :, 1:, :, :, :] += sqa[None, None, 1:, None, None, None] \
                * r6[:, :, :-1, :, :, :]
            xr = x6.reshape(d, d)
            drho += -1j * u * (xr - xr.conj().T)

        # measurement back-action on the resonator: a rho + rho a†
        m6 = np.zeros_like(r6)
        m6[:, :, :-1, :, :, :] += sqa[None, None, 1:, None, None, None] \
            * r6[:, :, 1:, :, :, :]
        m6[:, :, :, :, :, :-1] += sqa[None, None, None, None, None, 1:] \
            * r6[:, :, :, :, :, 1:]
        meas = m6.reshape(d, d) - ex_xt2 * rho

        if use_euler:
            # commutator at the pre-kick state, matching the dense form
            _csr_dense(h_data, h_indices, h_indptr, rho, tmp)
            rho = (rho + dt * drho + sqrt_eta_gt * dW[i] * meas
                   + dt * (-1j) * (tmp - tmp.conj().T))
        else:
            rho = rho + dt * drho + sqrt_eta_gt * dW[i] * meas
            _csr_dense(u_data, u_indices, u_indptr, rho, tmp)
            _csr_dense(u_data, u_indices, u_indptr, tmp.conj().T, tmp2)
            rho = tmp2.conj().T

        rho = 0.5 * (rho + rho.conj().T)
        if check_stride > 0 and i % check_stride == 0:
            if not _posdef_check(rho, clamp_floor):
                rho = _clamp(rho, clamp_floor)
                repairs += 1
        if renorm_stride > 0 and i % renorm_stride == 0:
            tr = np.trace(rho).real
            if not np.isfinite(tr) or tr <= 0:
                raise FloatingPointError(f"state blow-up at step {i}")
            rho /= tr

        # advance the estimator on the plant's record
        dw_f = dy - np.sqrt(eta * gamma_T_f) * 2.0 * f[5] * dt
        f = filter_step(f, filter_pars, u, dw_f, dt)
    return rho, f, repairs
