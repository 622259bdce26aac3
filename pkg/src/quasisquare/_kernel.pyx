# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Dormand-Prince 5(4) propagator; mirrors ``_kernel_py.integrate``."""
import numpy as np

from libc.math cimport fabs, fmax, fmin, pow, isfinite

cdef int STATUS_OK = 0
cdef int STATUS_UNDERFLOW = 1
cdef int STATUS_MAX_STEPS = 2
cdef int STATUS_NONFINITE = 3

cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920
cdef double E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40


cdef inline void _rhs(double u, double* co, double* cd, double* y,
                      double alpha, double beta, double delta, double* k) noexcept nogil:
    cdef double om = ((co[0] * u + co[1]) * u + co[2]) * u + co[3]
    cdef double de = ((cd[0] * u + cd[1]) * u + cd[2]) * u + cd[3]
    cdef double w = 0.5 * ((1.0 + alpha) * om + beta)
    cdef double d = 0.5 * (de + delta)
    k[0] = -d * y[1] + w * y[3]
    k[1] = d * y[0] - w * y[2]
    k[2] = w * y[1] + d * y[3]
    k[3] = -w * y[0] - d * y[2]


def integrate(const double[::1] stops, const long[::1] piece, const double[::1] knots,
              const double[:, ::1] om_c, const double[:, ::1] de_c,
              double alpha, double beta, double delta, psi0,
              double rtol, double atol, double h0, long max_steps):
    cdef Py_ssize_t K = stops.shape[0]
    out_arr = np.empty((K, 4))
    cdef double[:, ::1] out = out_arr
    cdef double y[4]
    cdef double yt[4]
    cdef double yn[4]
    cdef double k1[4]
    cdef double k2[4]
    cdef double k3[4]
    cdef double k4[4]
    cdef double k5[4]
    cdef double k6[4]
    cdef double k7[4]
    cdef double co[4]
    cdef double cd[4]
    cdef Py_ssize_t i, m, j
    cdef double t, t_end, tk, remaining, hh, s, u, err, e, sc, r, fac
    cdef double direction
    cdef double h = fabs(h0)
    cdef long nsteps = 0
    cdef bint last

    for m in range(4):
        y[m] = float(psi0[m])
        out[0, m] = y[m]
    direction = 1.0 if stops[K - 1] >= stops[0] else -1.0

    for i in range(K - 1):
        t = stops[i]
        t_end = stops[i + 1]
        j = piece[i]
        tk = knots[j]
        for m in range(4):
            co[m] = om_c[j, m]
            cd[m] = de_c[j, m]
        while True:
            remaining = fabs(t_end - t)
            if remaining <= 1e-13 * fmax(1.0, fabs(t_end)):
                break
            last = h >= remaining
            hh = remaining if last else h
            if not last and hh <= 1e-14 * fmax(1.0, fabs(t)):
                return out_arr, STATUS_UNDERFLOW, t, nsteps
            s = direction * hh
            u = t - tk
            _rhs(u, co, cd, y, alpha, beta, delta, k1)
            for m in range(4):
                yt[m] = y[m] + s * A21 * k1[m]
            _rhs(u + C2 * s, co, cd, yt, alpha, beta, delta, k2)
            for m in range(4):
                yt[m] = y[m] + s * (A31 * k1[m] + A32 * k2[m])
            _rhs(u + C3 * s, co, cd, yt, alpha, beta, delta, k3)
            for m in range(4):
                yt[m] = y[m] + s * (A41 * k1[m] + A42 * k2[m] + A43 * k3[m])
            _rhs(u + C4 * s, co, cd, yt, alpha, beta, delta, k4)
            for m in range(4):
                yt[m] = y[m] + s * (A51 * k1[m] + A52 * k2[m] + A53 * k3[m] + A54 * k4[m])
            _rhs(u + C5 * s, co, cd, yt, alpha, beta, delta, k5)
            for m in range(4):
                yt[m] = y[m] + s * (A61 * k1[m] + A62 * k2[m] + A63 * k3[m] + A64 * k4[m] + A65 * k5[m])
            _rhs(u + s, co, cd, yt, alpha, beta, delta, k6)
            for m in range(4):
                yn[m] = y[m] + s * (B1 * k1[m] + B3 * k3[m] + B4 * k4[m] + B5 * k5[m] + B6 * k6[m])
            _rhs(u + s, co, cd, yn, alpha, beta, delta, k7)
            err = 0.0
            for m in range(4):
                e = s * (E1 * k1[m] + E3 * k3[m] + E4 * k4[m] + E5 * k5[m] + E6 * k6[m] + E7 * k7[m])
                sc = atol + rtol * fmax(fabs(y[m]), fabs(yn[m]))
                r = fabs(e) / sc
                if r > err:
                    err = r
            nsteps += 1
            if nsteps > max_steps:
                return out_arr, STATUS_MAX_STEPS, t, nsteps
            if not isfinite(err):
                return out_arr, STATUS_NONFINITE, t, nsteps
            if err <= 1.0:
                t = t_end if last else t + s
                for m in range(4):
                    y[m] = yn[m]
                fac = 5.0 if err == 0.0 else fmin(5.0, 0.9 * pow(err, -0.2))
                if not last or fac < 1.0:
                    h = hh * fac
            else:
                h = hh * fmax(0.2, 0.9 * pow(err, -0.2))
        for m in range(4):
            out[i + 1, m] = y[m]
    return out_arr, STATUS_OK, stops[K - 1], nsteps
