"""Pure-Python Dormand-Prince 5(4) propagator for the driven two-level system.

Reference implementation of the compiled kernel in ``_kernel.pyx``; both
take identical arguments and return identical results up to rounding.

The state is four reals (Re c1, Im c1, Re c2, Im c2). Controls are piecewise
cubic: on piece ``j`` with ``u = t - knots[j]``,
``Omega = ((c[j,0] u + c[j,1]) u + c[j,2]) u + c[j,3]``.
Integration runs through ``stops`` in order (increasing or decreasing);
each stop interval lies inside a single control piece, so the right-hand
side is smooth within every adaptive step.
"""
import math

import numpy as np

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_MAX_STEPS = 2
STATUS_NONFINITE = 3

# Dormand-Prince tableau
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


def _rhs(u, co, cd, y, alpha, beta, delta):
    om = ((co[0] * u + co[1]) * u + co[2]) * u + co[3]
    de = ((cd[0] * u + cd[1]) * u + cd[2]) * u + cd[3]
    w = 0.5 * ((1.0 + alpha) * om + beta)
    d = 0.5 * (de + delta)
    y0, y1, y2, y3 = y
    return (-d * y1 + w * y3, d * y0 - w * y2, w * y1 + d * y3, -w * y0 - d * y2)


def integrate(stops, piece, knots, om_c, de_c, alpha, beta, delta, psi0, rtol, atol, h0, max_steps):
    """Propagate ``psi0`` through ``stops``.

    Returns ``(states, status, t_fail, nsteps)`` where ``states`` has one
    row per stop.
    """
    stops = np.asarray(stops, dtype=float)
    K = stops.shape[0]
    out = np.empty((K, 4))
    y = [float(v) for v in psi0]
    out[0] = y
    direction = 1.0 if stops[-1] >= stops[0] else -1.0
    h = abs(h0)
    nsteps = 0
    for i in range(K - 1):
        t = float(stops[i])
        t_end = float(stops[i + 1])
        j = int(piece[i])
        tk = float(knots[j])
        co = [float(v) for v in om_c[j]]
        cd = [float(v) for v in de_c[j]]
        while True:
            remaining = abs(t_end - t)
            if remaining <= 1e-13 * max(1.0, abs(t_end)):
                break
            last = h >= remaining
            hh = remaining if last else h
            if not last and hh <= 1e-14 * max(1.0, abs(t)):
                return out, STATUS_UNDERFLOW, t, nsteps
            s = direction * hh
            u = t - tk
            k1 = _rhs(u, co, cd, y, alpha, beta, delta)
            yt = [y[m] + s * A21 * k1[m] for m in range(4)]
            k2 = _rhs(u + C2 * s, co, cd, yt, alpha, beta, delta)
            yt = [y[m] + s * (A31 * k1[m] + A32 * k2[m]) for m in range(4)]
            k3 = _rhs(u + C3 * s, co, cd, yt, alpha, beta, delta)
            yt = [y[m] + s * (A41 * k1[m] + A42 * k2[m] + A43 * k3[m]) for m in range(4)]
            k4 = _rhs(u + C4 * s, co, cd, yt, alpha, beta, delta)
            yt = [y[m] + s * (A51 * k1[m] + A52 * k2[m] + A53 * k3[m] + A54 * k4[m]) for m in range(4)]
            k5 = _rhs(u + C5 * s, co, cd, yt, alpha, beta, delta)
            yt = [
                y[m] + s * (A61 * k1[m] + A62 * k2[m] + A63 * k3[m] + A64 * k4[m] + A65 * k5[m])
                for m in range(4)
            ]
            k6 = _rhs(u + s, co, cd, yt, alpha, beta, delta)
            yn = [
                y[m] + s * (B1 * k1[m] + B3 * k3[m] + B4 * k4[m] + B5 * k5[m] + B6 * k6[m])
                for m in range(4)
            ]
            k7 = _rhs(u + s, co, cd, yn, alpha, beta, delta)
            err = 0.0
            for m in range(4):
                e = s * (E1 * k1[m] + E3 * k3[m] + E4 * k4[m] + E5 * k5[m] + E6 * k6[m] + E7 * k7[m])
                sc = atol + rtol * max(abs(y[m]), abs(yn[m]))
                r = abs(e) / sc
                if r > err:
                    err = r
            nsteps += 1
            if nsteps > max_steps:
                return out, STATUS_MAX_STEPS, t, nsteps
            if not math.isfinite(err):
                return out, STATUS_NONFINITE, t, nsteps
            if err <= 1.0:
                t = t_end if last else t + s
                y = yn
                fac = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
                if not last or fac < 1.0:
                    h = hh * fac
            else:
                h = hh * max(0.2, 0.9 * err ** -0.2)
        out[i + 1] = y
    return out, STATUS_OK, float(stops[-1]), nsteps
