"""Time propagation of the two-level Schrodinger equation and angle extraction.

The adaptive Dormand-Prince kernel comes from the compiled extension when it
is importable and from the pure-Python reference otherwise; ``BACKEND``
names the one in use and every propagation function accepts ``backend=`` to
force either.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from . import _kernel_py
from .errors import IntegrationError
from .model import (
    EXCITED,
    GROUND,
    ControlWaveforms,
    DynamicalAngles,
    PerturbationParams,
)

try:  # compiled kernel is optional
    from . import _kernel as _kernel_ext
except ImportError:  # pragma: no cover - depends on the build
    _kernel_ext = None

log = logging.getLogger(__name__)

BACKEND = "compiled" if _kernel_ext is not None else "python"

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_SAMPLES = 2001
MAX_STEPS = 10_000_000
ANGLE_LAUNCH = 1e-6


def _kernel(backend: str | None):
    name = backend or BACKEND
    if name == "compiled":
        if _kernel_ext is None:
            raise RuntimeError("compiled kernel is not built; reinstall with Cython available")
        return _kernel_ext.integrate
    if name == "python":
        return _kernel_py.integrate
    raise ValueError(f"unknown backend {name!r}")


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    time_grid: np.ndarray
    states: np.ndarray  # (K, 2) complex
    nsteps: int = 0

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.states) ** 2

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def norm_deviation(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.states, axis=1) - 1.0)))


def _piecewise_coefficients(controls: ControlWaveforms, interpolation: str):
    t = controls.time_grid
    if interpolation == "cubic":
        om, de = controls.splines()
        return np.ascontiguousarray(om.c.T), np.ascontiguousarray(de.c.T)
    if interpolation == "linear":
        h = np.diff(t)
        def lin(v):
            c = np.zeros((t.size - 1, 4))
            c[:, 2] = np.diff(v) / h
            c[:, 3] = v[:-1]
            return c
        return lin(controls.rabi), lin(controls.detuning)
    raise ValueError(f"unknown interpolation {interpolation!r}")


def propagate(
    controls: ControlWaveforms,
    p: PerturbationParams = PerturbationParams(),
    initial_state=GROUND,
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    output_grid=None,
    interpolation: str = "cubic",
    reverse: bool = False,
    backend: str | None = None,
) -> StateTrajectory:
    """Solve i d/dt psi = H(t) psi under (perturbed) controls.

    Controls are interpolated by not-a-knot cubic splines through the
    samples (``interpolation="linear"`` is available for comparison).
    The trajectory is returned on ``output_grid`` (default: the control
    grid), always including both window ends. With ``reverse=True``,
    ``initial_state`` is taken at the final time and propagated back to
    the first one; the returned grid is still increasing.
    """
    psi0 = np.asarray(initial_state, dtype=complex)
    if psi0.shape != (2,):
        raise ValueError("initial_state must be a complex 2-vector")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("initial_state must have unit norm")
    knots = controls.time_grid
    t0, t1 = knots[0], knots[-1]
    if output_grid is None:
        out_t = knots
    else:
        out_t = np.asarray(output_grid, dtype=float)
        if np.any(np.diff(out_t) <= 0) or out_t[0] < t0 - 1e-12 or out_t[-1] > t1 + 1e-12:
            raise ValueError("output_grid must be increasing and inside the control window")
        out_t = np.clip(out_t, t0, t1)
    stops = np.union1d(knots, out_t)
    piece = np.clip(np.searchsorted(knots, stops[:-1], side="right") - 1, 0, knots.size - 2)
    om_c, de_c = _piecewise_coefficients(controls, interpolation)
    if reverse:
        stops = stops[::-1].copy()
        piece = piece[::-1].copy()
    piece = np.ascontiguousarray(piece, dtype=np.int64)
    y0 = np.array([psi0[0].real, psi0[0].imag, psi0[1].real, psi0[1].imag])
    h0 = 1e-3 * (t1 - t0) / max(1.0, np.max(np.abs(controls.rabi)) + np.max(np.abs(controls.detuning)))
    raw, status, t_fail, nsteps = _kernel(backend)(
        np.ascontiguousarray(stops), piece, knots, om_c, de_c,
        p.alpha, p.beta, p.delta, y0, rtol, atol, h0, MAX_STEPS,
    )
    if status != _kernel_py.STATUS_OK:
        reason = {
            _kernel_py.STATUS_UNDERFLOW: "step-size underflow",
            _kernel_py.STATUS_MAX_STEPS: "step budget exhausted",
            _kernel_py.STATUS_NONFINITE: "non-finite state",
        }[status]
        raise IntegrationError(f"{reason} at t={t_fail:.10g}", time=t_fail)
    if reverse:
        raw = raw[::-1]
        stops = stops[::-1]
    states = raw[:, 0::2] + 1j * raw[:, 1::2]
    keep = np.searchsorted(stops, out_t)
    return StateTrajectory(out_t.copy(), states[keep], int(nsteps))


def extract_angles(traj: StateTrajectory) -> DynamicalAngles:
    """Invert the angle parametrization along a trajectory.

    theta = 2 atan2(|c2|, |c1|). Where one component vanishes, varphi takes
    its limiting value pi/2 and gamma follows from the surviving phase.
    gamma is unwrapped along the grid; the re-encoded state matches up to a
    global sign.
    """
    c1 = traj.states[:, 0]
    c2 = traj.states[:, 1]
    a1, a2 = np.abs(c1), np.abs(c2)
    theta = 2.0 * np.arctan2(a2, a1)
    p1, p2 = np.angle(c1), np.angle(c2)
    tiny = 1e-12
    varphi = np.angle(np.exp(1j * (p1 - p2)))
    gamma = -(p1 + p2)
    at_north = a2 < tiny
    at_south = a1 < tiny
    varphi = np.where(at_north | at_south, 0.5 * np.pi, varphi)
    gamma = np.where(at_north, varphi - 2.0 * p1, gamma)
    gamma = np.where(at_south, -varphi - 2.0 * p2, gamma)
    # varphi and gamma are jointly defined mod 2 pi: keep gamma continuous
    gamma = np.unwrap(gamma)
    return DynamicalAngles(theta, varphi, gamma, traj.time_grid)


def integrate_angle_odes(
    controls: ControlWaveforms,
    initial: DynamicalAngles,
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    output_grid=None,
) -> DynamicalAngles:
    """Integrate the angle equations directly (independent of ``propagate``).

    A start at a pole is launched analytically: with varphi frozen at pi/2,
    theta grows as the partial pulse area, and the ODE takes over once theta
    reaches ``ANGLE_LAUNCH``. Samples before the launch time carry that
    analytic approximation. Integration stops early if theta comes within
    1e-9 of a pole again; later samples are NaN.
    """
    t = controls.time_grid
    out_t = t if output_grid is None else np.asarray(output_grid, dtype=float)
    om, de = controls.splines()
    th0 = float(initial.theta)
    vp0 = float(initial.varphi)
    ga0 = float(initial.gamma)
    t_start = t[0]
    pre = np.zeros(0, dtype=bool)
    if np.sin(th0) < ANGLE_LAUNCH:
        if abs(vp0 - 0.5 * np.pi) > 1e-12 and th0 < 0.5 * np.pi:
            raise ValueError("angle ODE cannot start at a pole unless varphi = pi/2")
        area = om.antiderivative()
        cum = area(t) - area(t[0])
        sign = 1.0 if th0 < 0.5 * np.pi else -1.0
        if cum[-1] <= ANGLE_LAUNCH:
            raise ValueError("pulse area too small to leave the pole")
        k = int(np.searchsorted(cum, ANGLE_LAUNCH))
        # refine the launch time inside [t[k-1], t[k]]
        from scipy.optimize import brentq

        t_start = brentq(lambda s: area(s) - area(t[0]) - ANGLE_LAUNCH, t[max(k - 1, 0)], t[k])
        th0 = th0 + sign * ANGLE_LAUNCH
        pre = out_t < t_start

    def rhs(s, y):
        th, vp, _ = y
        o = om(s)
        d = de(s)
        sin_t = np.sin(th)
        return [o * np.sin(vp), d + o * np.cos(vp) * np.cos(th) / sin_t, o * np.cos(vp) / sin_t]

    def near_pole(s, y):
        return np.sin(y[0]) - 1e-9

    near_pole.terminal = True
    near_pole.direction = -1
    sol = solve_ivp(
        rhs, (t_start, t[-1]), [th0, vp0, ga0], method="DOP853",
        rtol=rtol, atol=atol, dense_output=True, events=near_pole,
    )
    theta = np.full(out_t.size, np.nan)
    varphi = np.full(out_t.size, np.nan)
    gamma = np.full(out_t.size, np.nan)
    reached = (out_t >= t_start) & (out_t <= sol.t[-1])
    if np.any(reached):
        y = sol.sol(out_t[reached])
        theta[reached], varphi[reached], gamma[reached] = y
    if np.any(pre):
        area = om.antiderivative()
        theta[pre] = float(initial.theta) + (area(out_t[pre]) - area(t[0]))
        varphi[pre] = 0.5 * np.pi
        gamma[pre] = ga0
    return DynamicalAngles(theta, varphi, gamma, out_t)


def transfer_infidelity(traj: StateTrajectory, target=EXCITED) -> float:
    """1 - |<target|psi(t_f)>|^2, clipped at 0 against rounding."""
    target = np.asarray(target, dtype=complex)
    if abs(np.linalg.norm(target) - 1.0) > 1e-10:
        raise ValueError("target must have unit norm")
    overlap = np.vdot(target, traj.final_state)
    return max(0.0, float(1.0 - abs(overlap) ** 2))


def final_infidelity(controls: ControlWaveforms, p: PerturbationParams = PerturbationParams(), **kw) -> float:
    """Infidelity of complete transfer ground -> excited for one propagation."""
    kw.setdefault("output_grid", controls.time_grid[[0, -1]])
    return transfer_infidelity(propagate(controls, p, GROUND, **kw), EXCITED)


def rabi_formula(omega: float, detuning: float, duration: float) -> float:
    """Excited population for constant controls starting in the ground state."""
    gen = np.hypot(omega, detuning)
    return float((omega / gen) ** 2 * np.sin(0.5 * gen * duration) ** 2)


def resample(controls: ControlWaveforms, samples: int) -> ControlWaveforms:
    """Controls re-sampled on a uniform grid through their cubic interpolants."""
    t = np.linspace(controls.time_grid[0], controls.time_grid[-1], samples)
    om = CubicSpline(controls.time_grid, controls.rabi)(t)
    de = CubicSpline(controls.time_grid, controls.detuning)(t)
    return ControlWaveforms(t, np.maximum(om, 0.0), de, controls.label)
