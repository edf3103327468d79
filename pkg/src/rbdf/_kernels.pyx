# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-step spectral kernels (see _kernels_py for the contract)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def parity_project(cnp.complex128_t[:, ::1] c, int sign):
    cdef Py_ssize_t ny = c.shape[0]
    cdef Py_ssize_t mx = c.shape[1]
    cdef Py_ssize_t n, j, nf
    cdef double complex t, a, b
    cdef double s = 1.0 if sign > 0 else -1.0

    # Self-paired rows (n = 0 and the x2 Nyquist row).
    for j in range(mx):
        c[0, j] = 0.5 * (c[0, j] + s * c[0, j])
        c[ny // 2, j] = 0.5 * (c[ny // 2, j] + s * c[ny // 2, j])
    for n in range(1, ny // 2):
        nf = ny - n
        for j in range(mx):
            a = c[n, j]
            b = c[nf, j]
            t = 0.5 * (a + s * b)
            c[n, j] = t
            c[nf, j] = s * t
    # Realness constraint on the self-conjugate columns.
    cdef Py_ssize_t cols[2]
    cols[0] = 0
    cols[1] = mx - 1
    cdef Py_ssize_t ci
    for ci in range(2):
        j = cols[ci]
        c[0, j] = 0.5 * (c[0, j] + c[0, j].conjugate())
        c[ny // 2, j] = 0.5 * (c[ny // 2, j] + c[ny // 2, j].conjugate())
        for n in range(1, ny // 2):
            nf = ny - n
            t = 0.5 * (c[n, j] + c[nf, j].conjugate())
            c[n, j] = t
            c[nf, j] = t.conjugate()


def leray(cnp.complex128_t[:, ::1] c1, cnp.complex128_t[:, ::1] c2,
          double[:, ::1] KX, double[:, ::1] KY, double[:, ::1] invK2):
    cdef Py_ssize_t ny = c1.shape[0], mx = c1.shape[1]
    cdef Py_ssize_t n, j
    cdef double complex d
    for n in range(ny):
        for j in range(mx):
            d = (KX[n, j] * c1[n, j] + KY[n, j] * c2[n, j]) * invK2[n, j]
            c1[n, j] = c1[n, j] - KX[n, j] * d
            c2[n, j] = c2[n, j] - KY[n, j] * d


def div_pair(cnp.complex128_t[:, ::1] ah, cnp.complex128_t[:, ::1] bh,
             double[:, ::1] KX, double[:, ::1] KY, double[:, ::1] mask,
             cnp.complex128_t[:, ::1] out):
    cdef Py_ssize_t ny = ah.shape[0], mx = ah.shape[1]
    cdef Py_ssize_t n, j
    cdef double complex s
    cdef double complex I = 1j
    for n in range(ny):
        for j in range(mx):
            s = KX[n, j] * ah[n, j] + KY[n, j] * bh[n, j]
            out[n, j] = I * s * mask[n, j]


def rb_explicit(cnp.complex128_t[:, ::1] conv1, cnp.complex128_t[:, ::1] conv2,
                cnp.complex128_t[:, ::1] convth,
                cnp.complex128_t[:, ::1] u1h, cnp.complex128_t[:, ::1] u2h,
                cnp.complex128_t[:, ::1] thh,
                double[:, ::1] KX, double[:, ::1] KY, double[:, ::1] invK2,
                double g, double inv_l, double nu, double kappa,
                double[:, ::1] K2,
                cnp.complex128_t[:, ::1] out1, cnp.complex128_t[:, ::1] out2,
                cnp.complex128_t[:, ::1] outth):
    cdef Py_ssize_t ny = conv1.shape[0], mx = conv1.shape[1]
    cdef Py_ssize_t n, j
    cdef double complex o1, o2, d
    for n in range(ny):
        for j in range(mx):
            o1 = -conv1[n, j]
            o2 = -conv2[n, j] + g * thh[n, j]
            if nu != 0.0:
                o1 = o1 - nu * K2[n, j] * u1h[n, j]
                o2 = o2 - nu * K2[n, j] * u2h[n, j]
            d = (KX[n, j] * o1 + KY[n, j] * o2) * invK2[n, j]
            out1[n, j] = o1 - KX[n, j] * d
            out2[n, j] = o2 - KY[n, j] * d
            outth[n, j] = -convth[n, j] + inv_l * u2h[n, j]
            if kappa != 0.0:
                outth[n, j] = outth[n, j] - kappa * K2[n, j] * thh[n, j]


def heun_predict(cnp.complex128_t[:, ::1] y, cnp.complex128_t[:, ::1] k1,
                 double[:, ::1] efac, double dt, cnp.complex128_t[:, ::1] out):
    cdef Py_ssize_t ny = y.shape[0], mx = y.shape[1]
    cdef Py_ssize_t n, j
    for n in range(ny):
        for j in range(mx):
            out[n, j] = efac[n, j] * (y[n, j] + dt * k1[n, j])


def heun_correct(cnp.complex128_t[:, ::1] y, cnp.complex128_t[:, ::1] k1,
                 cnp.complex128_t[:, ::1] k2, double[:, ::1] efac, double dt,
                 cnp.complex128_t[:, ::1] out):
    cdef Py_ssize_t ny = y.shape[0], mx = y.shape[1]
    cdef Py_ssize_t n, j
    cdef double half_dt = 0.5 * dt
    for n in range(ny):
        for j in range(mx):
            out[n, j] = efac[n, j] * y[n, j] + half_dt * (efac[n, j] * k1[n, j] + k2[n, j])


def products_vel(double[:, ::1] u1p, double[:, ::1] u2p,
                 double[:, ::1] p11, double[:, ::1] p12, double[:, ::1] p22):
    cdef Py_ssize_t ny = u1p.shape[0], nx = u1p.shape[1]
    cdef Py_ssize_t i, j
    cdef double a, b
    for i in range(ny):
        for j in range(nx):
            a = u1p[i, j]
            b = u2p[i, j]
            p11[i, j] = a * a
            p12[i, j] = a * b
            p22[i, j] = b * b


def products_scalar(double[:, ::1] u1p, double[:, ::1] u2p, double[:, ::1] thp,
                    double[:, ::1] p1t, double[:, ::1] p2t):
    cdef Py_ssize_t ny = u1p.shape[0], nx = u1p.shape[1]
    cdef Py_ssize_t i, j
    cdef double t
    for i in range(ny):
        for j in range(nx):
            t = thp[i, j]
            p1t[i, j] = u1p[i, j] * t
            p2t[i, j] = u2p[i, j] * t


def add_scaled(cnp.complex128_t[:, ::1] out, cnp.complex128_t[:, ::1] a, double s):
    cdef Py_ssize_t ny = out.shape[0], mx = out.shape[1]
    cdef Py_ssize_t n, j
    for n in range(ny):
        for j in range(mx):
            out[n, j] = out[n, j] + s * a[n, j]


def nudge_feedback(cnp.complex128_t[:, ::1] r, cnp.complex128_t[:, ::1] c,
                   cnp.complex128_t[:, ::1] v, double[:, ::1] mask, double coef):
    cdef Py_ssize_t ny = r.shape[0], mx = r.shape[1]
    cdef Py_ssize_t n, j
    for n in range(ny):
        for j in range(mx):
            r[n, j] = r[n, j] + coef * (v[n, j] - mask[n, j] * c[n, j])
