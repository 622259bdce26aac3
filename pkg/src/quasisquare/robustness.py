"""Perturbative error integrals and brute-force robustness scans."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import IntegrationError
from .model import GROUND, EXCITED, ControlWaveforms, DynamicalAngles, PerturbationParams, fd_derivative
from .tdse import propagate, transfer_infidelity

AXES = ("alpha", "delta", "beta")


class FitError(ValueError):
    """Too few usable points for a log-log slope."""


@dataclass(frozen=True, eq=False)
class RobustnessCurve:
    axis: str
    values: np.ndarray
    infidelity: np.ndarray
    design_label: str = ""
    pulse_area: float = float("nan")

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        v = np.asarray(self.values, dtype=float)
        if v.size > 1 and np.any(np.diff(v) <= 0):
            raise ValueError("scan grid must be strictly increasing")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "infidelity", np.asarray(self.infidelity, dtype=float))

    def log10_infidelity(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log10(np.abs(self.infidelity))


def error_integrand_e(angles: DynamicalAngles, rates, p: PerturbationParams):
    """e = -(delta cos theta - alpha gamma' sin^2 theta - beta sin theta cos varphi) / 2."""
    th = np.asarray(angles.theta, dtype=float)
    vp = np.asarray(angles.varphi, dtype=float)
    _, ga_dot = rates
    return -0.5 * (p.delta * np.cos(th) - p.alpha * np.asarray(ga_dot) * np.sin(th) ** 2
                   - p.beta * np.sin(th) * np.cos(vp))


def error_integrand_f(angles: DynamicalAngles, rates, p: PerturbationParams):
    """f = [delta sin theta + alpha (gamma' sin 2theta / 2 - i theta')
    + beta (cos varphi cos theta - i sin varphi)] e^{i gamma} / 2."""
    th = np.asarray(angles.theta, dtype=float)
    vp = np.asarray(angles.varphi, dtype=float)
    ga = np.asarray(angles.gamma, dtype=float)
    th_dot, ga_dot = (np.asarray(r, dtype=float) for r in rates)
    inner = (p.delta * np.sin(th)
             + p.alpha * (0.5 * ga_dot * np.sin(2 * th) - 1j * th_dot)
             + p.beta * (np.cos(vp) * np.cos(th) - 1j * np.sin(vp)))
    return 0.5 * inner * np.exp(1j * ga)


def rates_from_angles(angles: DynamicalAngles):
    """(theta', gamma') by fourth-order finite differences on the angle grid."""
    t = angles.time_grid
    if t is None:
        raise ValueError("angles carry no time grid")
    return fd_derivative(t, angles.theta), fd_derivative(t, angles.gamma)


def _grid(angles):
    if angles.time_grid is None:
        raise ValueError("angles carry no time grid")
    return np.asarray(angles.time_grid, dtype=float)


def first_order_term(angles: DynamicalAngles, rates, p: PerturbationParams) -> complex:
    """O_1 = -i int e dt (composite Simpson)."""
    return complex(-1j * simpson(error_integrand_e(angles, rates, p), x=_grid(angles)))


def f_integral(angles: DynamicalAngles, rates, p: PerturbationParams) -> complex:
    return complex(simpson(error_integrand_f(angles, rates, p), x=_grid(angles)))


def predicted_infidelity(angles: DynamicalAngles, rates, p: PerturbationParams) -> float:
    """Second-order estimate |int f dt|^2 of the transfer error."""
    return abs(f_integral(angles, rates, p)) ** 2


def fidelity_scan(
    design: ControlWaveforms,
    axis: str,
    grid,
    *,
    target=EXCITED,
    **propagate_kw,
) -> RobustnessCurve:
    """Transfer infidelity along one perturbation axis, one propagation per grid value."""
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}")
    values = np.asarray(grid, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("scan grid must be finite")
    propagate_kw.setdefault("output_grid", design.time_grid[[0, -1]])
    out = np.empty(values.size)
    for k, v in enumerate(values):
        try:
            traj = propagate(design, PerturbationParams.along(axis, v), GROUND, **propagate_kw)
        except IntegrationError as exc:
            raise IntegrationError(f"scan aborted at {axis}={float(v)!r}: {exc}", time=exc.time) from exc
        out[k] = transfer_infidelity(traj, target)
    return RobustnessCurve(axis, values, out, design.label, design.pulse_area())


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    points: int


def infidelity_fit(curve: RobustnessCurve, fit_window=(1e-3, 1e-2)) -> SlopeFit:
    """Least-squares line through (log10 |value|, log10 infidelity) on the window."""
    lo, hi = fit_window
    x = np.abs(curve.values)
    y = curve.infidelity
    use = (x >= lo * (1 - 1e-12)) & (x <= hi * (1 + 1e-12)) & (y > 0)
    if np.count_nonzero(use) < 3:
        raise FitError(f"only {np.count_nonzero(use)} usable points in {fit_window}")
    lx, ly = np.log10(x[use]), np.log10(y[use])
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ np.array([slope, intercept])
    dof = max(lx.size - 2, 1)
    sxx = np.sum((lx - lx.mean()) ** 2)
    stderr = float(np.sqrt(np.sum(resid ** 2) / dof / sxx)) if sxx > 0 else float("inf")
    return SlopeFit(float(slope), float(intercept), stderr, int(lx.size))


def infidelity_slope(curve: RobustnessCurve, fit_window=(1e-3, 1e-2)) -> float:
    return infidelity_fit(curve, fit_window).slope
