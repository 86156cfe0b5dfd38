# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Dormand-Prince 5(4) kernel for the per-mode pair systems.

State layout (5 doubles): Re Qa, Im Qa, Re Qb, Im Qb, phi.  The right-hand
side is evaluated natively for the two scenario families; no Python
callbacks enter the hot loop.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, cosh, exp, fabs, sin, sqrt, tanh

cnp.import_array()

DEF NSTATE = 5

ctypedef struct Params:
    int family
    double p[8]

cdef double DP_C[7]
cdef double DP_A[7][6]
cdef double DP_B[7]
cdef double DP_E[7]

DP_C[:] = [0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0]
DP_B[:] = [35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192,
           -2187.0 / 6784, 11.0 / 84, 0.0]
DP_E[:] = [71.0 / 57600, 0.0, -71.0 / 16695, 71.0 / 1920,
           -17253.0 / 339200, 22.0 / 525, -1.0 / 40]

cdef void _fill_a():
    cdef int i, j
    for i in range(7):
        for j in range(6):
            DP_A[i][j] = 0.0
    DP_A[1][0] = 1.0 / 5
    DP_A[2][0] = 3.0 / 40; DP_A[2][1] = 9.0 / 40
    DP_A[3][0] = 44.0 / 45; DP_A[3][1] = -56.0 / 15; DP_A[3][2] = 32.0 / 9
    DP_A[4][0] = 19372.0 / 6561; DP_A[4][1] = -25360.0 / 2187
    DP_A[4][2] = 64448.0 / 6561; DP_A[4][3] = -212.0 / 729
    DP_A[5][0] = 9017.0 / 3168; DP_A[5][1] = -355.0 / 33
    DP_A[5][2] = 46732.0 / 5247; DP_A[5][3] = 49.0 / 176
    DP_A[5][4] = -5103.0 / 18656
    DP_A[6][0] = 35.0 / 384; DP_A[6][1] = 0.0; DP_A[6][2] = 500.0 / 1113
    DP_A[6][3] = 125.0 / 192; DP_A[6][4] = -2187.0 / 6784; DP_A[6][5] = 11.0 / 84

_fill_a()


cdef inline void _rhs(Params* pr, double x, double* y, double* dy) nogil:
    cdef double jac, w, b
    cdef double a2, a, sech2, a_eta, m2, k2
    cdef double kx2, ky2, kz2, msq, eps, omg, tau
    cdef double env, denv, s, ds, hx, hy, dhx, dhy, wdot, q
    cdef double rr, ri, phi2, c2, s2

    if pr.family == 1:
        # tanh-profile cosmology, x is conformal time
        k2 = pr.p[3] * pr.p[3]
        m2 = pr.p[4] * pr.p[4]
        a2 = pr.p[0] + pr.p[1] * tanh(pr.p[2] * x)
        a = sqrt(a2)
        sech2 = 1.0 - tanh(pr.p[2] * x) * tanh(pr.p[2] * x)
        a_eta = pr.p[1] * pr.p[2] * sech2 / (2.0 * a)
        w = sqrt(k2 / a2 + m2)
        b = -(a_eta / (2.0 * a2)) * (m2 / (w * w))
        jac = a
    else:
        # polarized-wave cavity mode, x is coordinate time
        kx2 = pr.p[0]; ky2 = pr.p[1]; kz2 = pr.p[2]; msq = pr.p[3]
        eps = pr.p[4]; omg = pr.p[5]; tau = pr.p[6]
        if tau > 0.0:
            env = exp(-(x / tau) * (x / tau))
            denv = -2.0 * x / (tau * tau) * env
        else:
            env = 1.0
            denv = 0.0
        s = sin(omg * x) * env
        ds = omg * cos(omg * x) * env + sin(omg * x) * denv
        hx = 1.0 + eps * s
        hy = 1.0 - eps * s
        dhx = eps * ds
        dhy = -eps * ds
        w = sqrt(kx2 / hx + ky2 / hy + kz2 + msq)
        wdot = -(kx2 * dhx / (hx * hx) + ky2 * dhy / (hy * hy)) / (2.0 * w)
        q = 0.5 * (dhx / hx + dhy / hy)
        b = -0.5 * q - wdot / (2.0 * w)
        jac = 1.0

    phi2 = 2.0 * y[4]
    c2 = cos(phi2)
    s2 = -sin(phi2)
    rr = jac * b * c2
    ri = jac * b * s2
    # d(Qa) = rot * conj(Qb), d(Qb) = rot * conj(Qa)
    dy[0] = rr * y[2] + ri * y[3]
    dy[1] = ri * y[2] - rr * y[3]
    dy[2] = rr * y[0] + ri * y[1]
    dy[3] = ri * y[0] - rr * y[1]
    dy[4] = jac * w


cdef inline double _err_norm(double* err, double* y0, double* y1,
                             double rtol, double atol) nogil:
    cdef double acc = 0.0
    cdef double sc, m
    cdef int i
    for i in range(NSTATE):
        m = fabs(y0[i])
        if fabs(y1[i]) > m:
            m = fabs(y1[i])
        sc = atol + rtol * m
        acc += (err[i] / sc) * (err[i] / sc)
    return sqrt(acc / NSTATE)


def pair_evolution(int family, params, double x0, x_samples,
                   double rtol=1e-10, double atol=1e-10,
                   double ident_cap=0.0):
    """Compiled counterpart of kernels.reference.pair_evolution."""
    cdef Params pr
    cdef int i, j, st
    pr.family = family
    pv = np.asarray(params, dtype=float)
    for i in range(8):
        pr.p[i] = pv[i] if i < pv.shape[0] else 0.0

    cdef cnp.ndarray[cnp.float64_t, ndim=1] samples = \
        np.ascontiguousarray(x_samples, dtype=np.float64)
    cdef Py_ssize_t nsamp = samples.shape[0]
    qa = np.empty(nsamp, dtype=complex)
    qb = np.empty(nsamp, dtype=complex)
    phase = np.empty(nsamp, dtype=float)

    cdef double y[NSTATE]
    cdef double ynew[NSTATE]
    cdef double yi[NSTATE]
    cdef double err[NSTATE]
    cdef double k[7][NSTATE]
    cdef double x = x0
    cdef double direction = 1.0 if samples[nsamp - 1] > x0 else -1.0
    cdef double span = fabs(samples[nsamp - 1] - x0)
    cdef double h, h_step, dt, enorm, factor, target, remaining, acc, drift
    cdef bint clamped
    cdef Py_ssize_t ti = 0
    cdef long n_steps = 0

    y[0] = 1.0; y[1] = 0.0; y[2] = 0.0; y[3] = 0.0; y[4] = 0.0
    _rhs(&pr, x, y, k[0])

    # initial step: same heuristic as the Python stepper
    cdef double d0 = 0.0, d1 = 0.0, d2 = 0.0, sc
    for i in range(NSTATE):
        sc = atol + rtol * fabs(y[i])
        d0 += (y[i] / sc) * (y[i] / sc)
        d1 += (k[0][i] / sc) * (k[0][i] / sc)
    d0 = sqrt(d0 / NSTATE); d1 = sqrt(d1 / NSTATE)
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6 * span
    else:
        h = 0.01 * d0 / d1
    for i in range(NSTATE):
        yi[i] = y[i] + h * direction * k[0][i]
    _rhs(&pr, x + h * direction, yi, ynew)
    for i in range(NSTATE):
        sc = atol + rtol * fabs(y[i])
        d2 += ((ynew[i] - k[0][i]) / sc) * ((ynew[i] - k[0][i]) / sc)
    d2 = sqrt(d2 / NSTATE) / h
    if d1 <= 1e-15 and d2 <= 1e-15:
        factor = 1e-6 * span
        if h * 1e-3 > factor:
            factor = h * 1e-3
    else:
        factor = (0.01 / (d1 if d1 > d2 else d2)) ** 0.2
    if factor < 100 * h:
        h = factor
    else:
        h = 100 * h
    if h > span:
        h = span

    if nsamp > 0 and fabs(samples[0] - x0) <= 1e-14 * max(1.0, fabs(x0)):
        qa[0] = y[0] + 1j * y[1]
        qb[0] = y[2] + 1j * y[3]
        phase[0] = y[4]
        ti = 1

    while ti < nsamp:
        target = samples[ti]
        remaining = fabs(target - x)
        clamped = h >= remaining
        h_step = remaining if clamped else h
        if h_step < 1e-14 * max(1.0, fabs(x)):
            x = target
            enorm = 0.0
            for i in range(NSTATE):
                ynew[i] = y[i]
                k[6][i] = k[0][i]
        else:
            dt = h_step * direction
            for st in range(1, 7):
                for i in range(NSTATE):
                    acc = 0.0
                    for j in range(st):
                        acc += DP_A[st][j] * k[j][i]
                    yi[i] = y[i] + dt * acc
                _rhs(&pr, x + DP_C[st] * dt, yi, k[st])
            for i in range(NSTATE):
                acc = 0.0
                for j in range(7):
                    acc += DP_B[j] * k[j][i]
                ynew[i] = y[i] + dt * acc
                acc = 0.0
                for j in range(7):
                    acc += DP_E[j] * k[j][i]
                err[i] = dt * acc
            enorm = _err_norm(err, y, ynew, rtol, atol)

        if enorm <= 1.0:
            n_steps += 1
            x = target if clamped else x + h_step * direction
            for i in range(NSTATE):
                y[i] = ynew[i]
                k[0][i] = k[6][i]
            if ident_cap > 0.0:
                drift = fabs(y[0] * y[0] + y[1] * y[1]
                             - y[2] * y[2] - y[3] * y[3] - 1.0)
                if drift > ident_cap:
                    raise_drift(drift, x)
            if clamped:
                qa[ti] = y[0] + 1j * y[1]
                qb[ti] = y[2] + 1j * y[3]
                phase[ti] = y[4]
                ti += 1
            if enorm == 0.0:
                factor = 10.0
            else:
                factor = 0.9 * enorm ** -0.2
                if factor > 10.0:
                    factor = 10.0
            if factor < 0.2:
                factor = 0.2
            h = h_step * factor
        else:
            factor = 0.9 * enorm ** -0.2
            if factor < 0.2:
                factor = 0.2
            h = h_step * factor
            if h < 1e-14 * max(1.0, fabs(x)):
                raise_underflow(x)

    return qa, qb, phase


def raise_drift(double drift, double x):
    from ..errors import IdentityDrift
    raise IdentityDrift(f"pair identity drift {drift:.3e} at x={x:.6g}")


def raise_underflow(double x):
    from ..errors import StepFailure
    raise StepFailure(f"step size underflow at x={x:.6g}")
