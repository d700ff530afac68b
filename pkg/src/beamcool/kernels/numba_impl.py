"""Numba-accelerated kernels (default backend when numba is importable).

Mirrors numpy_impl semantically: same signatures, same record layouts, same
noise streams (dW is pregenerated). Ladder products are fused entrywise
loops; the constant-Hamiltonian propagator is applied as a sparse (CSR)
sandwich.
"""

import numpy as np
from numba import njit

BACKEND_NAME = "numba"


@njit(cache=True)
def _moment_flow_impl(A, D, Ru, Iu, k, Acl, state0, h, win_steps, tol,
                      max_steps):
    s = state0.copy()
    oix = Iu[1]
    oip = -Iu[0]
    a11, a12, a21, a22 = A[0, 0], A[0, 1], A[1, 0], A[1, 1]
    b11, b12, b21, b22 = Acl[0, 0], Acl[0, 1], Acl[1, 0], Acl[1, 1]
    dxx, dxp, dpp = D[0, 0], D[0, 1], D[1, 1]
    rx, rp = Ru[0], Ru[1]
    k1 = np.empty(8)
    k2 = np.empty(8)
    k3 = np.empty(8)
    k4 = np.empty(8)
    tmp = np.empty(8)
    prev = np.empty(8)
    for j in range(8):
        prev[j] = 1e308
    steps = 0
    converged = False

    while steps < max_steps and not converged:
        for _ in range(win_steps):
            for stage in range(4):
                if stage == 0:
                    st = s
                elif stage == 1:
                    for j in range(8):
                        tmp[j] = s[j] + 0.5 * h * k1[j]
                    st = tmp
                elif stage == 2:
                    for j in range(8):
                        tmp[j] = s[j] + 0.5 * h * k2[j]
                    st = tmp
                else:
                    for j in range(8):
                        tmp[j] = s[j] + h * k3[j]
                    st = tmp
                mx, mp_, vx, vp, c = st[0], st[1], st[2], st[3], st[4]
                wx, wp, wc = st[5], st[6], st[7]
                kx = 2.0 * (vx * rx + c * rp) - oix
                kp = 2.0 * (c * rx + vp * rp) - oip
                if stage == 0:
                    out = k1
                elif stage == 1:
                    out = k2
                elif stage == 2:
                    out = k3
                else:
                    out = k4
                out[0] = b11 * mx + b12 * mp_
                out[1] = b21 * mx + b22 * mp_
                out[2] = 2.0 * (a11 * vx + a12 * c) + dxx - k * kx * kx
                out[3] = 2.0 * (a21 * c + a22 * vp) + dpp - k * kp * kp
                out[4] = (a11 * c + a12 * vp + a21 * vx + a22 * c + dxp
                          - k * kx * kp)
                out[5] = 2.0 * (b11 * wx + b12 * wc) + k * kx * kx
                out[6] = 2.0 * (b21 * wc + b22 * wp) + k * kp * kp
                out[7] = (b11 * wc + b12 * wp + b21 * wx + b22 * wc
                          + k * kx * kp)
            for j in range(8):
                s[j] += (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            steps += 1
            if steps >= max_steps:
                break
        ok = True
        for j in range(8):
            ref = abs(s[j])
            if ref < 1e-3:
                ref = 1e-3
            if abs(s[j] - prev[j]) > tol * ref:
                ok = False
            prev[j] = s[j]
        if ok:
            converged = True
    return s, steps, converged


def moment_flow(A, D, Ru, Iu, k_meas, Acl, state0, h, win_steps, tol,
                max_steps):
    s, steps, conv = _moment_flow_impl(
        np.ascontiguousarray(A, dtype=np.float64),
        np.ascontiguousarray(D, dtype=np.float64),
        np.ascontiguousarray(Ru, dtype=np.float64),
        np.ascontiguousarray(Iu, dtype=np.float64),
        float(k_meas),
        np.ascontiguousarray(Acl, dtype=np.float64),
        np.ascontiguousarray(state0, dtype=np.float64),
        float(h), int(win_steps), float(tol), int(max_steps))
    return s, steps, conv


@njit(cache=True)
def _chol_ok(rho, shift):
    """True iff rho + shift*I is positive definite (hand-rolled Cholesky)."""
    n = rho.shape[0]
    L = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(i + 1):
            acc = rho[i, j]
            if i == j:
                acc = acc + shift
            for k in range(j):
                acc -= L[i, k] * np.conj(L[j, k])
            if i == j:
                re = acc.real
                if re <= 0.0 or not np.isfinite(re):
                    return False
                L[i, j] = np.sqrt(re)
            else:
                L[i, j] = acc / L[j, j]
    return True


@njit(cache=True)
def _clamp_renorm(rho, floor):
    w, v = np.linalg.eigh(rho)
    n = rho.shape[0]
    for i in range(n):
        if w[i] < floor:
            w[i] = 0.0
    out = (v * w.astype(np.complex128)) @ v.conj().T
    tr = 0.0
    for i in range(n):
        tr += out[i, i].real
    return out / tr


@njit(cache=True)
def _reduced_sme_impl(rho0, U, H0, use_euler, c1, c2, gm_up, gm_down, gamma_t,
                      sqrt_eta_gt, alpha_x, alpha_p, vx, vp, feedback_on,
                      dt, dW, record_stride, clamp_floor, check_stride,
                      record_out, innovation_out):
    n = rho0.shape[0]
    rho = rho0.copy()
    new = np.empty_like(rho)
    sq = np.sqrt(np.arange(n).astype(np.float64))
    c1a = abs(c1) ** 2
    c2a = abs(c2) ** 2
    c12 = c1 * np.conj(c2)          # coefficient of b rho b
    c21 = c2 * np.conj(c1)          # coefficient of b† rho b†
    tcc = np.conj(c2) * c1          # 2-superdiagonal scale of c†c
    axc = np.conj(alpha_x)
    repairs = 0
    sample = 0
    steps = dW.shape[0]
    sq2 = np.sqrt(2.0)

    for i in range(steps):
        # tr(b rho) over the first superdiagonal
        exb = 0.0 + 0.0j
        for m in range(n - 1):
            exb += sq[m + 1] * rho[m + 1, m]
        ex_ox = 2.0 * (alpha_x * exb).real
        ex_op = 2.0 * (alpha_p * exb).real
        u = 0.0
        if feedback_on:
            u = -vx * ex_ox + vp * ex_op
        signal = sqrt_eta_gt * ex_ox * dt
        dy = signal + dW[i]
        innovation_out[i, 0] = dy
        innovation_out[i, 1] = signal

        if record_stride > 0 and i % record_stride == 0:
            ex_x = sq2 * exb.real
            ex_p = sq2 * exb.imag
            exn = 0.0
            for m in range(n):
                exn += m * rho[m, m].real
            exbb = 0.0 + 0.0j
            for m in range(n - 2):
                exbb += sq[m + 1] * sq[m + 2] * rho[m + 2, m]
            record_out[sample, 0] = i * dt
            record_out[sample, 1] = dy
            record_out[sample, 2] = u
            record_out[sample, 3] = ex_x
            record_out[sample, 4] = ex_p
            record_out[sample, 5] = exn + 0.5 + exbb.real - ex_x * ex_x
            record_out[sample, 6] = exn + 0.5 - exbb.real - ex_p * ex_p
            record_out[sample, 7] = exbb.imag - ex_x * ex_p
            sample += 1

        mw = sqrt_eta_gt * dW[i]
        for r in range(n):
            srp = sq[r + 1] if r + 1 < n else 0.0
            for cidx in range(n):
                scp = sq[cidx + 1] if cidx + 1 < n else 0.0
                v = rho[r, cidx]
                acc = 0.0 + 0.0j
                # thermal: gm_down b rho b† + gm_up b† rho b - anticomm
                if r + 1 < n and cidx + 1 < n:
                    acc += gm_down * srp * scp * rho[r + 1, cidx + 1]
                if r > 0 and cidx > 0:
                    acc += gm_up * sq[r] * sq[cidx] * rho[r - 1, cidx - 1]
                bbd_r = r + 1.0 if r < n - 1 else 0.0
                bbd_c = cidx + 1.0 if cidx < n - 1 else 0.0
                dth = 0.5 * (gm_down * (r + cidx) + gm_up * (bbd_r + bbd_c))
                acc -= dth * v
                # collapse channel c = C1 b + C2 b†
                t = 0.0 + 0.0j
                if r + 1 < n and cidx + 1 < n:
                    t += c1a * srp * scp * rho[r + 1, cidx + 1]
                if r + 1 < n and cidx > 0:
                    t += c12 * srp * sq[cidx] * rho[r + 1, cidx - 1]
                if r > 0 and cidx + 1 < n:
                    t += c21 * sq[r] * scp * rho[r - 1, cidx + 1]
                if r > 0 and cidx > 0:
                    t += c2a * sq[r] * sq[cidx] * rho[r - 1, cidx - 1]
                dcc_r = c1a * r + c2a * bbd_r
                dcc_c = c1a * cidx + c2a * bbd_c
                t -= 0.5 * (dcc_r + dcc_c) * v
                if r + 2 < n:
                    t -= 0.5 * tcc * sq[r + 1] * sq[r + 2] * rho[r + 2, cidx]
                if r >= 2:
                    t -= 0.5 * np.conj(tcc) * sq[r - 1] * sq[r] * rho[r - 2, cidx]
                if cidx + 2 < n:
                    t -= 0.5 * np.conj(tcc) * sq[cidx + 1] * sq[cidx + 2] \
                        * rho[r, cidx + 2]
                if cidx >= 2:
                    t -= 0.5 * tcc * sq[cidx - 1] * sq[cidx] * rho[r, cidx - 2]
                acc += gamma_t * t
                # drive -i u [alpha_x b + alpha_x* b†, rho]
                if feedback_on and u != 0.0:
                    oxr = 0.0 + 0.0j
                    rox = 0.0 + 0.0j
                    if r + 1 < n:
                        oxr += alpha_x * srp * rho[r + 1, cidx]
                    if r > 0:
                        oxr += axc * sq[r] * rho[r - 1, cidx]
                    if cidx > 0:
                        rox += alpha_x * sq[cidx] * rho[r, cidx - 1]
                    if cidx + 1 < n:
                        rox += axc * scp * rho[r, cidx + 1]
                    acc += -1j * u * (oxr - rox)
                # measurement back-action (c rho + rho c† - <c+c†> rho) dW
                m1 = 0.0 + 0.0j
                if r + 1 < n:
                    m1 += c1 * srp * rho[r + 1, cidx]
                if r > 0:
                    m1 += c2 * sq[r] * rho[r - 1, cidx]
                if cidx + 1 < n:
                    m1 += np.conj(c1) * scp * rho[r, cidx + 1]
                if cidx > 0:
                    m1 += np.conj(c2) * sq[cidx] * rho[r, cidx - 1]
                m1 -= ex_ox * v
                # euler-mode Hamiltonian
                if use_euler:
                    hr = 0.0 + 0.0j
                    for kk in range(max(0, r - 2), min(n, r + 3)):
                        hv = H0[r, kk]
                        if hv != 0.0:
                            hr += hv * rho[kk, cidx]
                    rh = 0.0 + 0.0j
                    for kk in range(max(0, cidx - 2), min(n, cidx + 3)):
                        hv = H0[kk, cidx]
                        if hv != 0.0:
                            rh += rho[r, kk] * hv
                    acc += -1j * (hr - rh)
                new[r, cidx] = v + dt * acc + mw * m1
        if use_euler:
            rho, new = new, rho
        else:
            tmp = U @ new
            rho = tmp @ U.conj().T

        # symmetrize + positivity policy + renormalize
        for r in range(n):
            for cidx in range(r + 1, n):
                av = 0.5 * (rho[r, cidx] + np.conj(rho[cidx, r]))
                rho[r, cidx] = av
                rho[cidx, r] = np.conj(av)
            rho[r, r] = complex(rho[r, r].real, 0.0)
        if check_stride > 0 and i % check_stride == 0:
            if not _chol_ok(rho, -clamp_floor):
                rho = _clamp_renorm(rho, clamp_floor)
                repairs += 1
        tr = 0.0
        for r in range(n):
            tr += rho[r, r].real
        if not np.isfinite(tr) or tr <= 0.0:
            raise FloatingPointError("state blow-up in reduced SME step")
        inv = 1.0 / tr
        for r in range(n):
            for cidx in range(n):
                rho[r, cidx] *= inv
    return rho, repairs


def reduced_sme_run(rho0, U, H0, use_euler, c1, c2, gm_up, gm_down, gamma_t,
                    sqrt_eta_gt, alpha_x, alpha_p, vx, vp, feedback_on,
                    dt, dW, record_stride, clamp_floor, check_stride,
                    record_out, innovation_out):
    n = rho0.shape[0]
    U_ = np.ascontiguousarray(U if U is not None else np.eye(n),
                              dtype=np.complex128)
    H_ = np.ascontiguousarray(H0 if H0 is not None else np.zeros((n, n)),
                              dtype=np.complex128)
    return _reduced_sme_impl(
        np.ascontiguousarray(rho0, dtype=np.complex128), U_, H_,
        bool(use_euler), complex(c1), complex(c2), float(gm_up),
        float(gm_down), float(gamma_t), float(sqrt_eta_gt), complex(alpha_x),
        complex(alpha_p), float(vx), float(vp), bool(feedback_on), float(dt),
        np.ascontiguousarray(dW, dtype=np.float64), int(record_stride),
        float(clamp_floor), int(check_stride), record_out, innovation_out)


@njit(cache=True, inline="always")
def _filter_step_nb(f, pars, u, dw, dt, out):
    omega_S = pars[0]
    omega_M = pars[1]
    omega_T = pars[2]
    g_mt = pars[3]
    gamma_M = pars[4]
    gamma_S = pars[5]
    gamma_T = pars[6]
    M_phi = pars[7]
    M_r = pars[8]
    eta = pars[9]
    sx, sy, sz = f[0], f[1], f[2]
    reb, imb, rea, ima = f[3], f[4], f[5], f[6]
    vxt, vpt, cxp = f[7], f[8], f[9]
    gdeph = 2.0 * gamma_S * (M_phi * M_phi + 0.25 * M_r * M_r)
    grel = gamma_S * M_r * M_r
    dreb = omega_M * imb - 0.5 * gamma_M * reb + g_mt * sz * rea
    dimb = -omega_M * reb - 0.5 * gamma_M * imb + g_mt * sz * ima
    drea = omega_T * ima - 0.5 * gamma_T * rea - g_mt * sz * reb
    dima = -omega_T * rea - 0.5 * gamma_T * ima - g_mt * sz * imb - u
    sqeg = np.sqrt(eta * gamma_T)
    nre = sqeg * (vxt - 0.5) * dw
    nim = sqeg * cxp * dw
    out[0] = sx + dt * (-omega_S * sy - gdeph * sx)
    out[1] = sy + dt * (omega_S * sx - gdeph * sy)
    out[2] = sz + dt * (-grel * (sz + 1.0))
    out[3] = reb + dt * dreb
    out[4] = imb + dt * dimb
    out[5] = rea + dt * drea + nre
    out[6] = ima + dt * dima + nim
    out[7] = vxt + dt * (-gamma_T * vxt + 2.0 * omega_T * cxp
                         + 0.5 * gamma_T
                         - 2.0 * eta * gamma_T * (vxt - 0.5) ** 2)
    out[8] = vpt + dt * (-gamma_T * vpt - 2.0 * omega_T * cxp
                         + 0.5 * gamma_T - 2.0 * eta * gamma_T * cxp * cxp)
    out[9] = cxp + dt * (-gamma_T * cxp + omega_T * (vpt - vxt)
                         - 2.0 * eta * gamma_T * (vxt - 0.5) * cxp)


def filter_step(f, pars, u, dw, dt):
    out = np.empty(10)
    _filter_step_wrap(np.asarray(f, dtype=np.float64),
                      np.asarray(pars, dtype=np.float64),
                      float(u), float(dw), float(dt), out)
    return out


@njit(cache=True)
def _filter_step_wrap(f, pars, u, dw, dt, out):
    _filter_step_nb(f, pars, u, dw, dt, out)


def feedback_from_filter(f, vx, vp):
    return -2.0 * vx * f[5] + 2.0 * vp * f[6]


@njit(cache=True)
def _filter_selfloop_impl(f0, pars, vx, vp, feedback_on, dt, dW,
                          record_stride, record_out):
    f = f0.copy()
    nxt = np.empty(10)
    eta = pars[9]
    gamma_T = pars[6]
    sqeg = np.sqrt(eta * gamma_T)
    sample = 0
    for i in range(dW.shape[0]):
        u = 0.0
        if feedback_on:
            u = -2.0 * vx * f[5] + 2.0 * vp * f[6]
        dy = sqeg * 2.0 * f[5] * dt + dW[i]
        if record_stride > 0 and i % record_stride == 0:
            record_out[sample, 0] = i * dt
            for j in range(10):
                record_out[sample, 1 + j] = f[j]
            record_out[sample, 11] = u
            record_out[sample, 12] = dy
            sample += 1
        _filter_step_nb(f, pars, u, dW[i], dt, nxt)
        for j in range(10):
            f[j] = nxt[j]
            if not np.isfinite(f[j]):
                raise FloatingPointError("filter blow-up")
    return f


def filter_selfloop_run(f0, pars, vx, vp, feedback_on, dt, dW, record_stride,
                        record_out):
    return _filter_selfloop_impl(
        np.asarray(f0, dtype=np.float64), np.asarray(pars, dtype=np.float64),
        float(vx), float(vp), bool(feedback_on), float(dt),
        np.ascontiguousarray(dW, dtype=np.float64), int(record_stride),
        record_out)


@njit(cache=True)
def _csr_mul(data, indices, indptr, x, out):
    n = indptr.shape[0] - 1
    m = x.shape[1]
    for row in range(n):
        for col in range(m):
            out[row, col] = 0.0
        for k in range(indptr[row], indptr[row + 1]):
            a = data[k]
            j = indices[k]
            for col in range(m):
                out[row, col] += a * x[j, col]
    return out


@njit(cache=True)
def _full_sme_impl(rho0, u_data, u_indices, u_indptr, h_data, h_indices,
                   h_indptr, use_euler, nb, nt, gm_up, gm_down, gs_phi, gs_r,
                   gamma_t, sqrt_eta_gt, filter_pars, f0, vx, vp,
                   controller_kind, dt, dW, record_stride, clamp_floor,
                   check_stride, renorm_stride, record_out, innovation_out,
                   filter_out):
    d = rho0.shape[0]
    rho = rho0.copy()
    new = np.empty_like(rho)
    tmp = np.empty_like(rho)
    f = f0.copy()
    fn = np.empty(10)
    sqb = np.sqrt(np.arange(nb).astype(np.float64))
    sqa = np.sqrt(np.arange(nt).astype(np.float64))
    sq2 = np.sqrt(2.0)
    sb = 2 * nt   # beam index stride
    sqstride = nt  # qubit index stride

    # per-basis-state decay diagonal of Sum_k c_k† c_k
    diag = np.empty(d)
    szf = np.empty(d)
    for ib in range(nb):
        for iq in range(2):
            for it in range(nt):
                idx = (ib * 2 + iq) * nt + it
                bbd = ib + 1.0 if ib < nb - 1 else 0.0   # truncated b b†
                diag[idx] = (gm_down * ib + gm_up * bbd
                             + (gs_r if iq == 0 else 0.0) + gamma_t * it)
                szf[idx] = 1.0 if iq == 0 else -1.0

    eta_f = filter_pars[9]
    gT_f = filter_pars[6]
    sqeg_f = np.sqrt(eta_f * gT_f)
    repairs = 0
    sample = 0
    steps = dW.shape[0]

    for i in range(steps):
        # tr(a rho) and tr(b rho), tr(bb rho), tr(n_b rho), tr(sz rho)
        exa = 0.0 + 0.0j
        exb = 0.0 + 0.0j
        exbb = 0.0 + 0.0j
        exn = 0.0
        exsz = 0.0
        for ib in range(nb):
            for iq in range(2):
                base = (ib * 2 + iq) * nt
                for it in range(nt):
                    idx = base + it
                    pr = rho[idx, idx].real
                    exn += ib * pr
                    exsz += szf[idx] * pr
                    if it + 1 < nt:
                        exa += sqa[it + 1] * rho[idx + 1, idx]
                    if ib + 1 < nb:
                        exb += sqb[ib + 1] * rho[idx + sb, idx]
                    if ib + 2 < nb:
                        exbb += sqb[ib + 1] * sqb[ib + 2] * rho[idx + 2 * sb, idx]
        ex_xt2 = 2.0 * exa.real
        signal = sqrt_eta_gt * ex_xt2 * dt
        dy = signal + dW[i]
        innovation_out[i, 0] = dy
        innovation_out[i, 1] = signal

        u = 0.0
        if controller_kind == 1:
            u = -2.0 * vx * f[5] + 2.0 * vp * f[6]

        if record_stride > 0 and i % record_stride == 0:
            ex_x = sq2 * exb.real
            ex_p = sq2 * exb.imag
            record_out[sample, 0] = i * dt
            record_out[sample, 1] = dy
            record_out[sample, 2] = u
            record_out[sample, 3] = ex_x
            record_out[sample, 4] = ex_p
            record_out[sample, 5] = exn + 0.5 + exbb.real - ex_x * ex_x
            record_out[sample, 6] = exn + 0.5 - exbb.real - ex_p * ex_p
            record_out[sample, 7] = sq2 * exa.real
            record_out[sample, 8] = sq2 * exa.imag
            record_out[sample, 9] = exsz
            record_out[sample, 10] = repairs
            for j in range(10):
                filter_out[sample, j] = f[j]
            sample += 1

        mw = sqrt_eta_gt * dW[i]
        for I in range(d):
            ib = I // sb
            iq = (I // nt) % 2
            it = I % nt
            for J in range(d):
                jb = J // sb
                jq = (J // nt) % 2
                jt = J % nt
                v = rho[I, J]
                acc = 0.0 + 0.0j
                if ib + 1 < nb and jb + 1 < nb:
                    acc += gm_down * sqb[ib + 1] * sqb[jb + 1] \
                        * rho[I + sb, J + sb]
                if ib > 0 and jb > 0:
                    acc += gm_up * sqb[ib] * sqb[jb] * rho[I - sb, J - sb]
                if iq == 1 and jq == 1:
                    # qubit lowering: populate the ground sector (index 1)
                    acc += gs_r * rho[I - sqstride, J - sqstride]
                if iq != jq:
                    acc -= 2.0 * gs_phi * v
                if it + 1 < nt and jt + 1 < nt:
                    acc += gamma_t * sqa[it + 1] * sqa[jt + 1] * rho[I + 1, J + 1]
                acc -= 0.5 * (diag[I] + diag[J]) * v
                # measurement + drive act on the resonator factor
                m1 = 0.0 + 0.0j
                if it + 1 < nt:
                    m1 += sqa[it + 1] * rho[I + 1, J]
                if jt + 1 < nt:
                    m1 += sqa[jt + 1] * rho[I, J + 1]
                m1 -= ex_xt2 * v
                if u != 0.0:
                    xr = 0.0 + 0.0j
                    rx_ = 0.0 + 0.0j
                    if it + 1 < nt:
                        xr += sqa[it + 1] * rho[I + 1, J]
                    if it > 0:
                        xr += sqa[it] * rho[I - 1, J]
                    if jt > 0:
                        rx_ += sqa[jt] * rho[I, J - 1]
                    if jt + 1 < nt:
                        rx_ += sqa[jt + 1] * rho[I, J + 1]
                    acc += -1j * u * (xr - rx_)
                new[I, J] = v + dt * acc + mw * m1

        if use_euler:
            # commutator evaluated at the pre-kick state, as in the dense form
            _csr_mul(h_data, h_indices, h_indptr, rho, tmp)
            for I in range(d):
                for J in range(d):
                    new[I, J] = new[I, J] + dt * (-1j) \
                        * (tmp[I, J] - np.conj(tmp[J, I]))
            rho, new = new, rho
        else:
            _csr_mul(u_data, u_indices, u_indptr, new, tmp)
            # rho' = (U (U new†))† applied via two CSR products
            for I in range(d):
                for J in range(I, d):
                    a = tmp[I, J]
                    tmp[I, J] = np.conj(tmp[J, I])
                    tmp[J, I] = np.conj(a)
            _csr_mul(u_data, u_indices, u_indptr, tmp, new)
            for I in range(d):
                for J in range(d):
                    rho[I, J] = np.conj(new[J, I])

        for I in range(d):
            for J in range(I + 1, d):
                av = 0.5 * (rho[I, J] + np.conj(rho[J, I]))
                rho[I, J] = av
                rho[J, I] = np.conj(av)
            rho[I, I] = complex(rho[I, I].real, 0.0)
        if check_stride > 0 and i % check_stride == 0:
            if not _chol_ok(rho, -clamp_floor):
                rho = _clamp_renorm(rho, clamp_floor)
                repairs += 1
        if renorm_stride > 0 and i % renorm_stride == 0:
            tr = 0.0
            for I in range(d):
                tr += rho[I, I].real
            if not np.isfinite(tr) or tr <= 0.0:
                raise FloatingPointError("state blow-up in full SME step")
            inv = 1.0 / tr
            for I in range(d):
                for J in range(d):
                    rho[I, J] *= inv

        dw_f = dy - sqeg_f * 2.0 * f[5] * dt
        _filter_step_nb(f, filter_pars, u, dw_f, dt, fn)
        for j in range(10):
            f[j] = fn[j]
    return rho, f, repairs


def full_sme_run(rho0, u_data, u_indices, u_indptr, h_data, h_indices,
                 h_indptr, use_euler, nb, nt, gm_up, gm_down, gs_phi, gs_r,
                 gamma_t, sqrt_eta_gt, filter_pars, f0, vx, vp,
                 controller_kind, dt, dW, record_stride, clamp_floor,
                 check_stride, renorm_stride, record_out, innovation_out,
                 filter_out):
    return _full_sme_impl(
        np.ascontiguousarray(rho0, dtype=np.complex128),
        np.ascontiguousarray(u_data, dtype=np.complex128),
        np.ascontiguousarray(u_indices, dtype=np.int64),
        np.ascontiguousarray(u_indptr, dtype=np.int64),
        np.ascontiguousarray(h_data, dtype=np.complex128),
        np.ascontiguousarray(h_indices, dtype=np.int64),
        np.ascontiguousarray(h_indptr, dtype=np.int64),
        bool(use_euler), int(nb), int(nt), float(gm_up), float(gm_down),
        float(gs_phi), float(gs_r), float(gamma_t), float(sqrt_eta_gt),
        np.asarray(filter_pars, dtype=np.float64),
        np.asarray(f0, dtype=np.float64), float(vx), float(vp),
        int(controller_kind), float(dt),
        np.ascontiguousarray(dW, dtype=np.float64), int(record_stride),
        float(clamp_floor), int(check_stride), int(renorm_stride), record_out,
        innovation_out, filter_out)
