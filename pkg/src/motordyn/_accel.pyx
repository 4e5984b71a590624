# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_purepy.py``.

Every arithmetic expression keeps the evaluation order of the Python
version; the extension is built with ``-ffp-contract=off`` so results match
the fallback bit for bit.
"""

from libc.math cimport sqrt, tanh, isfinite

import numpy as np

BACKEND = "cython"


cdef struct Coef:
    double rs, sls, kr, a_r, b_r, pp, tk, inertia, fric


cdef struct Gains:
    double kp_i, ki_i, kp_f, ki_f, kp_w, ki_w, i_max, id_max, u_max, flux_min, tc


cdef inline Coef _coef(tuple c):
    cdef Coef r
    r.rs = c[0]; r.sls = c[1]; r.kr = c[2]; r.a_r = c[3]; r.b_r = c[4]
    r.pp = c[5]; r.tk = c[6]; r.inertia = c[7]; r.fric = c[8]
    return r


cdef inline Gains _gains(tuple g):
    cdef Gains r
    r.kp_i = g[0]; r.ki_i = g[1]; r.kp_f = g[2]; r.ki_f = g[3]; r.kp_w = g[4]
    r.ki_w = g[5]; r.i_max = g[6]; r.id_max = g[7]; r.u_max = g[8]
    r.flux_min = g[9]; r.tc = g[10]
    return r


cdef inline void _rhs(const double* x, double ud, double uq, double tl, double ws,
                      const Coef* c, double* d) noexcept nogil:
    cdef double isd = x[0], isq = x[1], fd = x[2], fq = x[3], w = x[4]
    cdef double slip = ws - c.pp * w
    cdef double dfd = -c.a_r * fd + c.b_r * isd + slip * fq
    cdef double dfq = -c.a_r * fq + c.b_r * isq - slip * fd
    d[0] = (ud - c.rs * isd - c.kr * dfd + ws * (c.sls * isq + c.kr * fq)) / c.sls
    d[1] = (uq - c.rs * isq - c.kr * dfq - ws * (c.sls * isd + c.kr * fd)) / c.sls
    d[2] = dfd
    d[3] = dfq
    cdef double tau = c.tk * (fd * isq - fq * isd)
    d[4] = (tau - tl - c.fric * w) / c.inertia


cdef inline void _rk4(double* x, double ud, double uq, double tl, double ws,
                      double dt, const Coef* c) noexcept nogil:
    cdef double a[5]
    cdef double b[5]
    cdef double cc[5]
    cdef double d[5]
    cdef double y[5]
    cdef double h2 = 0.5 * dt
    cdef double s = dt / 6.0
    cdef int i
    _rhs(x, ud, uq, tl, ws, c, a)
    for i in range(5):
        y[i] = x[i] + h2 * a[i]
    _rhs(y, ud, uq, tl, ws, c, b)
    for i in range(5):
        y[i] = x[i] + h2 * b[i]
    _rhs(y, ud, uq, tl, ws, c, cc)
    for i in range(5):
        y[i] = x[i] + dt * cc[i]
    _rhs(y, ud, uq, tl, ws, c, d)
    for i in range(5):
        x[i] = x[i] + s * (a[i] + 2.0 * b[i] + 2.0 * cc[i] + d[i])


cdef inline double _clamp(double v, double lo, double hi) noexcept nogil:
    if v > hi:
        return hi
    if v < lo:
        return lo
    return v


cdef inline bint _integrate_ok(double unsat, double sat, double err) noexcept nogil:
    if unsat == sat:
        return True
    return (unsat > sat and err < 0.0) or (unsat < sat and err > 0.0)


cdef inline void _foc(double w_ref, double flux_ref, const double* x, double* ctrl,
                      const Coef* c, double lm, const Gains* g,
                      double* ud_out, double* uq_out) noexcept nogil:
    cdef double isd = x[0], isq = x[1], fd = x[2], w = x[4]
    cdef double e_f = flux_ref - fd
    cdef double id_un = flux_ref / lm + g.kp_f * e_f + ctrl[2]
    cdef double id_ref = _clamp(id_un, -g.id_max, g.id_max)
    cdef double e_w = w_ref - w
    cdef double iq_lim = sqrt(g.i_max * g.i_max - id_ref * id_ref)
    cdef double iq_un = g.kp_w * e_w + ctrl[3]
    cdef double iq_ref = _clamp(iq_un, -iq_lim, iq_lim)
    cdef double fden = fd if fd >= g.flux_min else g.flux_min
    cdef double ws = c.pp * w + c.b_r * isq / fden
    cdef double e_d = id_ref - isd
    cdef double e_q = iq_ref - isq
    cdef double ud = g.kp_i * e_d + ctrl[0] - ws * c.sls * isq
    cdef double uq = g.kp_i * e_q + ctrl[1] + ws * (c.sls * isd + c.kr * fd)
    cdef double mag = sqrt(ud * ud + uq * uq)
    cdef double scale
    if mag > g.u_max:
        scale = g.u_max / mag
        ud = ud * scale
        uq = uq * scale
    else:
        ctrl[0] = ctrl[0] + g.ki_i * e_d * g.tc
        ctrl[1] = ctrl[1] + g.ki_i * e_q * g.tc
    if _integrate_ok(id_un, id_ref, e_f):
        ctrl[2] = ctrl[2] + g.ki_f * e_f * g.tc
    if _integrate_ok(iq_un, iq_ref, e_w):
        ctrl[3] = ctrl[3] + g.ki_w * e_w * g.tc
    ctrl[4] = ws
    ud_out[0] = ud
    uq_out[0] = uq


def rk4_motor(tuple x, double ud, double uq, double tl, double ws, double dt, tuple coef):
    cdef Coef c = _coef(coef)
    cdef double s[5]
    cdef int i
    for i in range(5):
        s[i] = x[i]
    _rk4(s, ud, uq, tl, ws, dt, &c)
    return (s[0], s[1], s[2], s[3], s[4])


def simulate_closed_loop(const double[::1] w_ref, const double[::1] flux_ref,
                         const double[::1] load, tuple coef, double lm, tuple gains,
                         double dt, int n_sub, int decim, double[:, ::1] out):
    cdef Coef c = _coef(coef)
    cdef Gains g = _gains(gains)
    cdef double x[5]
    cdef double ctrl[5]
    cdef double ud = 0.0, uq = 0.0
    cdef Py_ssize_t k, j, n_ctrl = w_ref.shape[0]
    cdef int i, sub
    cdef Py_ssize_t failed = -1
    for i in range(5):
        x[i] = 0.0
        ctrl[i] = 0.0
    with nogil:
        for k in range(n_ctrl):
            _foc(w_ref[k], flux_ref[k], x, ctrl, &c, lm, &g, &ud, &uq)
            if k % decim == 0:
                j = k // decim
                out[j, 0] = x[0]
                out[j, 1] = x[1]
                out[j, 2] = x[2]
                out[j, 3] = x[3]
                out[j, 4] = x[4]
                out[j, 5] = ud
                out[j, 6] = uq
                out[j, 7] = c.tk * (x[2] * x[1] - x[3] * x[0])
                out[j, 8] = ctrl[4]
            for sub in range(n_sub):
                _rk4(x, ud, uq, load[k], ctrl[4], dt, &c)
            if not (isfinite(x[0]) and isfinite(x[1]) and isfinite(x[2])
                    and isfinite(x[3]) and isfinite(x[4])):
                failed = k
                break
    return failed


def diag_scan_forward(const double[:, :, ::1] x, const double[::1] w, const double[::1] u,
                      const double[::1] b, const double[:, ::1] h0, bint reverse):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], T = x.shape[2]
    out_arr = np.empty((B, C, T))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t bi, ci, step, t
    cdef double h, wc, uc, bc
    with nogil:
        for bi in range(B):
            for ci in range(C):
                h = h0[bi, ci]
                wc = w[ci]
                uc = u[ci]
                bc = b[ci]
                for step in range(T):
                    t = T - 1 - step if reverse else step
                    h = tanh(wc * x[bi, ci, t] + bc + uc * h)
                    out[bi, ci, t] = h
    return out_arr


def diag_scan_backward(const double[:, :, ::1] dout, const double[:, :, ::1] x,
                       const double[:, :, ::1] hs, const double[:, ::1] h0,
                       const double[::1] w, const double[::1] u, bint reverse):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], T = x.shape[2]
    dx_arr = np.empty((B, C, T))
    dh0_arr = np.empty((B, C))
    dw_arr = np.zeros(C)
    du_arr = np.zeros(C)
    db_arr = np.zeros(C)
    cdef double[:, :, ::1] dx = dx_arr
    cdef double[:, ::1] dh0 = dh0_arr
    cdef double[::1] dw = dw_arr
    cdef double[::1] du = du_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t bi, ci, step, t
    cdef double carry, h, hp, da, wc, uc, sw, su, sb
    with nogil:
        for ci in range(C):
            wc = w[ci]
            uc = u[ci]
            sw = 0.0
            su = 0.0
            sb = 0.0
            for bi in range(B):
                carry = 0.0
                for step in range(T):
                    # walk in reverse processing order
                    t = step if reverse else T - 1 - step
                    h = hs[bi, ci, t]
                    if reverse:
                        hp = h0[bi, ci] if t == T - 1 else hs[bi, ci, t + 1]
                    else:
                        hp = h0[bi, ci] if t == 0 else hs[bi, ci, t - 1]
                    da = (dout[bi, ci, t] + carry) * (1.0 - h * h)
                    dx[bi, ci, t] = da * wc
                    sw = sw + da * x[bi, ci, t]
                    su = su + da * hp
                    sb = sb + da
                    carry = da * uc
                dh0[bi, ci] = carry
            dw[ci] = sw
            du[ci] = su
            db[ci] = sb
    return dx_arr, dh0_arr, dw_arr, du_arr, db_arr
