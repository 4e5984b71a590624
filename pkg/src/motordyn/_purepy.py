"""Pure-Python/numpy implementations of the hot kernels.

These mirror ``_accel.pyx`` operation for operation, so that the compiled and
fallback simulators agree bit for bit on the same platform.

Packed argument layouts (built by :mod:`motordyn.sim`):

``coef``  = (rs, sigma_ls, kr, a_r, b_r, pole_pairs, torque_k, inertia, friction)
``gains`` = (kp_i, ki_i, kp_f, ki_f, kp_w, ki_w, i_max, id_max, u_max, flux_min, tc)
``ctrl``  = (int_d, int_q, int_f, int_w, omega_s)
"""

import math

import numpy as np

BACKEND = "python"


def motor_rhs(isd, isq, fd, fq, w, ud, uq, tl, ws, coef):
    rs, sls, kr, a_r, b_r, pp, tk, inertia, fric = coef
    slip = ws - pp * w
    dfd = -a_r * fd + b_r * isd + slip * fq
    dfq = -a_r * fq + b_r * isq - slip * fd
    disd = (ud - rs * isd - kr * dfd + ws * (sls * isq + kr * fq)) / sls
    disq = (uq - rs * isq - kr * dfq - ws * (sls * isd + kr * fd)) / sls
    tau = tk * (fd * isq - fq * isd)
    dw = (tau - tl - fric * w) / inertia
    return disd, disq, dfd, dfq, dw


def rk4_motor(x, ud, uq, tl, ws, dt, coef):
    """One classical RK4 step with inputs held over the step."""
    x0, x1, x2, x3, x4 = x
    h2 = 0.5 * dt
    a0, a1, a2, a3, a4 = motor_rhs(x0, x1, x2, x3, x4, ud, uq, tl, ws, coef)
    b0, b1, b2, b3, b4 = motor_rhs(
        x0 + h2 * a0, x1 + h2 * a1, x2 + h2 * a2, x3 + h2 * a3, x4 + h2 * a4,
        ud, uq, tl, ws, coef)
    c0, c1, c2, c3, c4 = motor_rhs(
        x0 + h2 * b0, x1 + h2 * b1, x2 + h2 * b2, x3 + h2 * b3, x4 + h2 * b4,
        ud, uq, tl, ws, coef)
    d0, d1, d2, d3, d4 = motor_rhs(
        x0 + dt * c0, x1 + dt * c1, x2 + dt * c2, x3 + dt * c3, x4 + dt * c4,
        ud, uq, tl, ws, coef)
    s = dt / 6.0
    return (
        x0 + s * (a0 + 2.0 * b0 + 2.0 * c0 + d0),
        x1 + s * (a1 + 2.0 * b1 + 2.0 * c1 + d1),
        x2 + s * (a2 + 2.0 * b2 + 2.0 * c2 + d2),
        x3 + s * (a3 + 2.0 * b3 + 2.0 * c3 + d3),
        x4 + s * (a4 + 2.0 * b4 + 2.0 * c4 + d4),
    )


def _clamp(v, lo, hi):
    if v > hi:
        return hi
    if v < lo:
        return lo
    return v


def _integrate_ok(unsat, sat, err):
    # conditional integration: freeze while saturated unless the error unwinds
    if unsat == sat:
        return True
    return (unsat > sat and err < 0.0) or (unsat < sat and err > 0.0)


def foc_step(w_ref, flux_ref, x, ctrl, coef, lm, gains):
    rs, sls, kr, a_r, b_r, pp, tk, inertia, fric = coef
    kp_i, ki_i, kp_f, ki_f, kp_w, ki_w, i_max, id_max, u_max, flux_min, tc = gains
    isd, isq, fd, fq, w = x
    int_d, int_q, int_f, int_w, _ = ctrl

    e_f = flux_ref - fd
    id_un = flux_ref / lm + kp_f * e_f + int_f
    id_ref = _clamp(id_un, -id_max, id_max)

    e_w = w_ref - w
    iq_lim = math.sqrt(i_max * i_max - id_ref * id_ref)
    iq_un = kp_w * e_w + int_w
    iq_ref = _clamp(iq_un, -iq_lim, iq_lim)

    ws = pp * w + b_r * isq / max(fd, flux_min)

    e_d = id_ref - isd
    e_q = iq_ref - isq
    ud = kp_i * e_d + int_d - ws * sls * isq
    uq = kp_i * e_q + int_q + ws * (sls * isd + kr * fd)
    mag = math.sqrt(ud * ud + uq * uq)
    clamped = mag > u_max
    if clamped:
        scale = u_max / mag
        ud = ud * scale
        uq = uq * scale
    else:
        int_d = int_d + ki_i * e_d * tc
        int_q = int_q + ki_i * e_q * tc
    if _integrate_ok(id_un, id_ref, e_f):
        int_f = int_f + ki_f * e_f * tc
    if _integrate_ok(iq_un, iq_ref, e_w):
        int_w = int_w + ki_w * e_w * tc
    return ud, uq, (int_d, int_q, int_f, int_w, ws)


def simulate_closed_loop(w_ref, flux_ref, load, coef, lm, gains, dt, n_sub, decim, out):
    """Run the sampled FOC loop; fill ``out`` (n_samples x 9) every ``decim`` periods.

    Columns: i_sd, i_sq, phi_rd, phi_rq, omega_r, u_d, u_q, tau_em, omega_s.
    Returns -1 on success, else the controller step index at which the state
    became non-finite.
    """
    tk = coef[6]
    x = (0.0, 0.0, 0.0, 0.0, 0.0)
    ctrl = (0.0, 0.0, 0.0, 0.0, 0.0)
    n_ctrl = len(w_ref)
    isfinite = math.isfinite
    for k in range(n_ctrl):
        ud, uq, ctrl = foc_step(float(w_ref[k]), float(flux_ref[k]), x, ctrl, coef, lm, gains)
        ws = ctrl[4]
        if k % decim == 0:
            j = k // decim
            isd, isq, fd, fq, w = x
            out[j, 0] = isd
            out[j, 1] = isq
            out[j, 2] = fd
            out[j, 3] = fq
            out[j, 4] = w
            out[j, 5] = ud
            out[j, 6] = uq
            out[j, 7] = tk * (fd * isq - fq * isd)
            out[j, 8] = ws
        tl = float(load[k])
        for _ in range(n_sub):
            x = rk4_motor(x, ud, uq, tl, ws, dt, coef)
        if not (isfinite(x[0]) and isfinite(x[1]) and isfinite(x[2])
                and isfinite(x[3]) and isfinite(x[4])):
            return k
    return -1


def diag_scan_forward(x, w, u, b, h0, reverse):
    """Diagonal recurrence over the last axis of ``x`` (B, C, T)."""
    T = x.shape[2]
    pre = w[None, :, None] * x + b[None, :, None]
    out = np.empty_like(x)
    h = h0
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        h = np.tanh(pre[:, :, t] + u * h)
        out[:, :, t] = h
    return out


def diag_scan_backward(dout, x, hs, h0, w, u, reverse):
    """Backprop through :func:`diag_scan_forward`.

    Returns (dx, dh0, dw, du, db); parameter grads are batch sums.
    """
    B, C, T = x.shape
    dx = np.empty_like(x)
    da_all = np.empty_like(x)
    hprev_all = np.empty_like(x)
    carry = np.zeros((B, C))
    if reverse:
        steps = range(T)
    else:
        steps = range(T - 1, -1, -1)
    for t in steps:
        h = hs[:, :, t]
        if reverse:
            hp = h0 if t == T - 1 else hs[:, :, t + 1]
        else:
            hp = h0 if t == 0 else hs[:, :, t - 1]
        da = (dout[:, :, t] + carry) * (1.0 - h * h)
        da_all[:, :, t] = da
        hprev_all[:, :, t] = hp
        carry = da * u
    dx[...] = da_all * w[None, :, None]
    dw = np.einsum("bct,bct->c", da_all, x)
    du = np.einsum("bct,bct->c", da_all, hprev_all)
    db = da_all.sum(axis=(0, 2))
    return dx, carry, dw, du, db
