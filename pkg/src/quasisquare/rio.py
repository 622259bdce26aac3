"""Amplitude-robust, area-optimal population inversion (robust inverse optimization).

Geometry
--------
The pulse area ``int sqrt(theta'^2 + gamma'^2 sin^2 theta) dt`` is the length
of the curve ``n = (sin theta cos gamma, sin theta sin gamma, cos theta)`` on
the unit sphere, and the two amplitude-robustness integrals are the
horizontal components of ``int n x dn``. The optimal curve therefore leaves
the north pole along the meridian gamma_i = pi/2, reaches the south pole,
and in between has geodesic curvature linear in the horizontal position,
``kappa = mu . n``. Detuning along the curve follows as ``Delta = -Omega kappa``.

Near the poles the curve runs along meridians, so theta as a function of
gamma has infinite slope there; trajectories are parametrized by arc length
(equal to the partial pulse area) instead.

Solve
-----
1. Polyline on the sphere: minimize the discrete energy (equal-spacing
   version of the length) under the two constraints with an augmented
   Lagrangian, L-BFGS inner solves, refined over grid levels.
2. Polish: fit ``mu`` from the polyline's discrete curvature and shoot the
   Euler-Lagrange ODE to land exactly on the south pole with vanishing
   robustness integrals.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.optimize import least_squares, minimize

from .errors import ConvergenceError, DesignError
from .model import (
    ControlWaveforms,
    HyperGaussianSpec,
    SquarePulse,
    fd_derivative,
    hyper_gaussian_matched,
)

log = logging.getLogger(__name__)

GAMMA_I = 0.5 * np.pi
DEFAULT_SEEDS = (5 * np.pi / 3, np.pi, 4 * np.pi / 3, 2 * np.pi, 7 * np.pi / 3)
NORTH = np.array([0.0, 0.0, 1.0])
SOUTH = np.array([0.0, 0.0, -1.0])
SHOOT_RTOL = 1e-13
SHOOT_ATOL = 1e-14
# within this partial area of a pole the curve is replaced by its meridian
# (curvature vanishes at the poles, so the error is O(r^3))
POLE_PATCH = 1e-5


@dataclass(frozen=True, eq=False)
class GeodesicTrajectory:
    """Arc-length sampled robust curve.

    ``ell`` runs from 0 to ``area``; ``gamma`` is unwrapped, so the curve is
    also available in the (gamma, theta) chart as ``gamma_grid``/``theta``.
    """

    ell: np.ndarray
    theta: np.ndarray
    gamma: np.ndarray
    varphi: np.ndarray
    points: np.ndarray
    tangents: np.ndarray
    area: float
    residuals: tuple[float, float]
    curvature_coeffs: np.ndarray
    polyline_area: float = float("nan")
    minima: tuple = ()
    solver_info: dict = field(default_factory=dict)
    _dense: object = field(default=None, repr=False)

    @property
    def gamma_grid(self) -> np.ndarray:
        return self.gamma

    @property
    def gamma_final(self) -> float:
        return float(self.gamma[-1])

    def curvature(self, points=None) -> np.ndarray:
        pts = self.points if points is None else points
        return pts[..., 0] * self.curvature_coeffs[0] + pts[..., 1] * self.curvature_coeffs[1]

    def evaluate(self, ell) -> tuple[np.ndarray, np.ndarray]:
        """Points and unit tangents at arbitrary arc lengths (dense ODE output)."""
        ell = np.clip(np.asarray(ell, dtype=float), 0.0, self.area)
        if self._dense is None:
            raise RuntimeError("trajectory carries no dense solution")
        y = self._dense(ell)
        return y[0:3].T, y[3:6].T


# ---------------------------------------------------------------------------
# spherical helpers


def sphere_point(theta, gamma):
    st = np.sin(theta)
    return np.stack([st * np.cos(gamma), st * np.sin(gamma), np.cos(theta)], axis=-1)


def chart_angles(points, tangents, gamma_i=GAMMA_I, gamma_f=None):
    """(theta, gamma, varphi) from points and unit tangents along a curve.

    At the poles gamma takes the take-off/landing meridian and varphi its
    limit pi/2.
    """
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    rho = np.hypot(x, y)
    theta = np.arctan2(rho, z)
    raw = np.arctan2(y, x)
    pole = rho < 1e-10  # meridian undefined to rounding this close to a pole
    gamma = raw.copy()
    if np.any(~pole):
        first = np.argmax(~pole)
        gamma[:first] = gamma_i
        for k in range(first, gamma.size):
            if pole[k]:
                gamma[k] = gamma[k - 1]
        gamma = np.unwrap(gamma)
        # anchor the branch at the take-off meridian
        gamma += 2 * np.pi * np.round((gamma_i - gamma[first]) / (2 * np.pi))
    else:
        gamma[:] = gamma_i
    if gamma_f is not None:
        gamma[pole & (z < 0)] = gamma_f
    gamma[0] = gamma_i if pole[0] else gamma[0]
    e_theta = np.stack([np.cos(theta) * np.cos(gamma), np.cos(theta) * np.sin(gamma), -np.sin(theta)], axis=-1)
    e_gamma = np.stack([-np.sin(gamma), np.cos(gamma), np.zeros_like(gamma)], axis=-1)
    varphi = np.arctan2(np.sum(tangents * e_theta, axis=1), np.sum(tangents * e_gamma, axis=1))
    return theta, gamma, varphi


# ---------------------------------------------------------------------------
# polyline stage


def _seed_polyline(gamma_f: float, M: int) -> np.ndarray:
    """theta linear in gamma from 0 to pi, resampled to equal chords."""
    g = np.linspace(GAMMA_I, gamma_f, 40 * M + 1)
    th = np.pi * (g - GAMMA_I) / (gamma_f - GAMMA_I)
    pts = sphere_point(th, g)
    return _resample_equal(pts, M)


def _resample_equal(pts: np.ndarray, M: int) -> np.ndarray:
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    target = np.linspace(0.0, s[-1], M + 1)
    out = np.stack([np.interp(target, s, pts[:, k]) for k in range(3)], axis=1)
    out /= np.linalg.norm(out, axis=1, keepdims=True)
    out[0], out[-1] = NORTH, SOUTH
    return out


def _polyline_parts(x: np.ndarray, M: int):
    raw = x.reshape(M - 1, 3)
    norm = np.linalg.norm(raw, axis=1, keepdims=True)
    p = np.vstack([NORTH, raw / norm, SOUTH])
    return raw, norm, p


def polyline_constraints(p: np.ndarray) -> np.ndarray:
    """Exact robustness integrals of the chord polygon (x, y components of sum n_j x n_{j+1})."""
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    cx = np.sum(y[:-1] * z[1:] - z[:-1] * y[1:])
    cy = np.sum(z[:-1] * x[1:] - x[:-1] * z[1:])
    return np.array([cx, cy])


def polyline_area(p: np.ndarray) -> float:
    chords = np.linalg.norm(np.diff(p, axis=0), axis=1)
    return float(np.sum(2.0 * np.arcsin(np.clip(0.5 * chords, 0.0, 1.0))))


def _al_value_grad(x, M, lam, rho):
    raw, norm, p = _polyline_parts(x, M)
    d = np.diff(p, axis=0)
    energy = M * np.sum(d * d)
    g = np.zeros_like(p)
    g[1:-1] = 2 * M * (d[:-1] - d[1:])
    c = polyline_constraints(p)
    # gradients of cx = sum y_j z_{j+1} - z_j y_{j+1}, cy = sum z_j x_{j+1} - x_j z_{j+1}
    gx = np.zeros_like(p)
    gy = np.zeros_like(p)
    gx[:, 1] = np.concatenate([p[1:, 2], [0.0]]) - np.concatenate([[0.0], p[:-1, 2]])
    gx[:, 2] = np.concatenate([[0.0], p[:-1, 1]]) - np.concatenate([p[1:, 1], [0.0]])
    gy[:, 2] = np.concatenate([p[1:, 0], [0.0]]) - np.concatenate([[0.0], p[:-1, 0]])
    gy[:, 0] = np.concatenate([[0.0], p[:-1, 2]]) - np.concatenate([p[1:, 2], [0.0]])
    mult = lam + rho * c
    g += mult[0] * gx + mult[1] * gy
    value = energy + lam @ c + 0.5 * rho * c @ c
    gi = g[1:-1]
    pi = p[1:-1]
    gp = (gi - np.sum(gi * pi, axis=1, keepdims=True) * pi) / norm
    return value, gp.ravel()


def _solve_polyline_level(p0: np.ndarray, tol: float, max_outer: int = 40):
    M = p0.shape[0] - 1
    x = p0[1:-1].ravel().copy()
    lam = np.zeros(2)
    rho = 10.0
    c_prev = np.inf
    for outer in range(max_outer):
        res = minimize(
            _al_value_grad, x, args=(M, lam, rho), jac=True, method="L-BFGS-B",
            options={"maxiter": 20000, "maxcor": 30, "gtol": 1e-11, "ftol": 1e-15},
        )
        x = res.x
        _, _, p = _polyline_parts(x, M)
        x = p[1:-1].ravel().copy()
        c = polyline_constraints(p)
        cn = float(np.linalg.norm(c))
        if cn < tol:
            return p, lam, cn, outer + 1
        lam = lam + rho * c
        if cn > 0.25 * c_prev:
            rho *= 10.0
        c_prev = cn
    return p, lam, cn, max_outer


def _align_takeoff(p: np.ndarray) -> np.ndarray:
    """Rotate about z so the curve leaves the north pole along gamma_i, gamma increasing."""
    az = np.arctan2(p[1, 1], p[1, 0])
    rot = GAMMA_I - az
    c, s = np.cos(rot), np.sin(rot)
    q = p.copy()
    q[:, 0] = c * p[:, 0] - s * p[:, 1]
    q[:, 1] = s * p[:, 0] + c * p[:, 1]
    gam = np.unwrap(np.arctan2(q[1:-1, 1], q[1:-1, 0]))
    if gam[-1] < gam[0]:
        # mirror about the take-off meridian (gamma -> 2 gamma_i - gamma)
        q[:, 0] = -q[:, 0]
    return q


def solve_polyline(gamma_f_seed: float, grid_points: int = 512, tol: float = 1e-9):
    """Discrete robust geodesic from one seed, refined over grid levels."""
    levels = [m for m in (64, 128, 256) if m < grid_points] + [grid_points]
    p = _seed_polyline(gamma_f_seed, levels[0])
    info = {"levels": []}
    for M in levels:
        if p.shape[0] != M + 1:
            p = _resample_equal(p, M)
        p, lam, cn, n_outer = _solve_polyline_level(p, tol)
        info["levels"].append({"M": M, "constraint_norm": cn, "outer": n_outer})
    return _align_takeoff(p), info


def _fit_curvature_coeffs(p: np.ndarray) -> np.ndarray:
    """Least-squares mu in kappa = mu . n from the polyline's turning angles."""
    u = p[1:-1] - p[:-2]
    v = p[2:] - p[1:-1]
    n = p[1:-1]
    turn = np.arctan2(np.sum(np.cross(u, v) * n, axis=1), np.sum(u * v, axis=1))
    kappa = turn / (0.5 * (np.linalg.norm(u, axis=1) + np.linalg.norm(v, axis=1)))
    mu, *_ = np.linalg.lstsq(n[:, :2], kappa, rcond=None)
    return mu


# ---------------------------------------------------------------------------
# shooting stage


def _el_rhs(s, y, mx, my):
    n = y[0:3]
    t = y[3:6]
    c = np.cross(n, t)
    k = mx * n[0] + my * n[1]
    return np.concatenate([t, -n + k * c, c[:2]])


def _shoot(params, dense=False):
    mx, my, length = params
    y0 = np.array([0.0, 0.0, 1.0, np.cos(GAMMA_I), np.sin(GAMMA_I), 0.0, 0.0, 0.0])
    return solve_ivp(
        _el_rhs, (0.0, length), y0, args=(mx, my), method="DOP853",
        rtol=SHOOT_RTOL, atol=SHOOT_ATOL, dense_output=dense,
    )


def _shoot_residual(params):
    y = _shoot(params).y[:, -1]
    return np.array([y[0], y[1], y[6], y[7]])


def polish(mu0: np.ndarray, length0: float, tol: float = 1e-11):
    """Shoot the Euler-Lagrange curve from the north pole onto the south pole."""
    res = least_squares(
        _shoot_residual, [mu0[0], mu0[1], length0], method="lm",
        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=400,
    )
    worst = float(np.max(np.abs(res.fun)))
    if worst > tol:
        raise ConvergenceError(
            f"geodesic shooting did not converge (max residual {worst:.3e})",
            {"residual": worst, "params": res.x.tolist()},
        )
    return res.x, worst


def robustness_residuals(g: GeodesicTrajectory) -> tuple[float, float]:
    """Real and imaginary parts of int f dt at unit amplitude error.

    In arc length the integrand is ``(cos theta cos varphi - i sin varphi) e^{i gamma} / 2``,
    which depends only on the curve. Composite Simpson on the trajectory grid.
    """
    return _curve_integral(g.ell, g.theta, g.gamma, g.varphi)


def _curve_integral(ell, theta, gamma, varphi):
    integrand = 0.5 * (np.cos(theta) * np.cos(varphi) - 1j * np.sin(varphi)) * np.exp(1j * gamma)
    z = simpson(integrand, x=ell)
    return float(z.real), float(z.imag)


def path_robustness_integral(t, theta, gamma, theta_dot=None, gamma_dot=None) -> complex:
    """int f dt at unit amplitude error along a path sampled at parameter values ``t``.

    ``f dt = (gamma' sin 2theta / 2 - i theta') e^{i gamma} dt / 2`` only
    involves d(theta) and d(gamma), so any monotone parametrization gives the
    same value. Rates default to fourth-order finite differences; Simpson rule.
    """
    t = np.asarray(t, dtype=float)
    theta = np.asarray(theta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    th_dot = fd_derivative(t, theta) if theta_dot is None else np.asarray(theta_dot, dtype=float)
    ga_dot = fd_derivative(t, gamma) if gamma_dot is None else np.asarray(gamma_dot, dtype=float)
    integrand = 0.5 * (0.5 * ga_dot * np.sin(2 * theta) - 1j * th_dot) * np.exp(1j * gamma)
    return complex(simpson(integrand, x=t))


def _trajectory_from_params(params, grid_points, extra):
    mx, my, length = params
    sol = _shoot(params, dense=True)
    ell = np.linspace(0.0, length, grid_points + 1)
    y = sol.sol(ell)
    pts = y[0:3].T.copy()
    tan = y[3:6].T.copy()
    pts[0], pts[-1] = NORTH, SOUTH
    gamma_f = float(np.arctan2(-tan[-1, 1], -tan[-1, 0]))
    theta, gamma, varphi = chart_angles(pts, tan, GAMMA_I, None)
    # landing meridian on the unwrapped branch
    gamma_f += 2 * np.pi * np.round((gamma[-2] - gamma_f) / (2 * np.pi))
    gamma[-1] = gamma_f
    varphi[0] = varphi[-1] = 0.5 * np.pi
    res = _curve_integral(ell, theta, gamma, varphi)
    return GeodesicTrajectory(
        ell=ell, theta=theta, gamma=gamma, varphi=varphi, points=pts, tangents=tan,
        area=float(length), residuals=res, curvature_coeffs=np.array([mx, my]),
        _dense=sol.sol, **extra,
    )


def solve_geodesic(
    grid_points: int = 512,
    tol: float = 1e-6,
    seeds=DEFAULT_SEEDS,
    polish_curve: bool = True,
) -> GeodesicTrajectory:
    """Area-minimal amplitude-robust curve for complete transfer.

    Every seed (a final gamma for a theta-linear-in-gamma start) runs the
    polyline solve; distinct minima are reported in ``minima`` and the
    smallest-area one is polished and returned.
    """
    if grid_points < 64:
        raise ValueError("grid_points must be >= 64")
    if not tol > 0:
        raise ValueError("tol must be positive")
    t0 = time.perf_counter()
    found = []
    for seed in seeds:
        p, info = solve_polyline(seed, grid_points, tol=min(1e-9, tol))
        cn = float(np.linalg.norm(polyline_constraints(p)))
        area = polyline_area(p)
        gam = np.unwrap(np.arctan2(p[1:-1, 1], p[1:-1, 0]))
        found.append({"seed": float(seed), "area": area, "constraint_norm": cn,
                      "gamma_span": float(gam[-1] - gam[0]), "p": p, "info": info})
        log.info("seed %.4f: polyline area %.6f, |c| %.2e", seed, area, cn)
    feasible = [f for f in found if f["constraint_norm"] < tol]
    if not feasible:
        best = min(found, key=lambda f: f["constraint_norm"])
        raise ConvergenceError(
            "no seed satisfied the robustness constraints",
            {"best_constraint_norm": best["constraint_norm"], "best_area": best["area"]},
        )
    distinct = []
    for f in sorted(feasible, key=lambda f: f["area"]):
        if all(abs(f["area"] - d["area"]) > 1e-4 for d in distinct):
            distinct.append(f)
    best = distinct[0]
    minima = tuple({"polyline_area": d["area"], "seed": d["seed"]} for d in distinct)
    info = {"seconds_polyline": time.perf_counter() - t0, "seeds": [
        {k: v for k, v in f.items() if k not in ("p",)} for f in found]}
    p = best["p"]
    if not polish_curve:
        return _trajectory_from_polyline(p, best["area"], minima, info)
    mu0 = _fit_curvature_coeffs(p)
    params, shoot_res = polish(mu0, best["area"])
    info["shooting_residual"] = shoot_res
    info["seconds_total"] = time.perf_counter() - t0
    traj = _trajectory_from_params(
        params, grid_points,
        {"polyline_area": best["area"], "minima": minima, "solver_info": info},
    )
    if max(abs(traj.residuals[0]), abs(traj.residuals[1])) > tol:
        raise ConvergenceError(
            f"robustness residuals {traj.residuals} exceed tol {tol}",
            {"residuals": traj.residuals},
        )
    return traj


def _trajectory_from_polyline(p, area, minima, info):
    M = p.shape[0] - 1
    ell = np.linspace(0.0, polyline_area(p), M + 1)
    tan = np.gradient(p, ell, axis=0)
    tan /= np.linalg.norm(tan, axis=1, keepdims=True)
    theta, gamma, varphi = chart_angles(p, tan)
    mu = _fit_curvature_coeffs(p)
    return GeodesicTrajectory(
        ell=ell, theta=theta, gamma=gamma, varphi=varphi, points=p, tangents=tan,
        area=float(ell[-1]), residuals=_curve_integral(ell, theta, gamma, varphi),
        curvature_coeffs=mu, polyline_area=area, minima=minima, solver_info=info,
    )


# ---------------------------------------------------------------------------
# time parametrization


@dataclass(frozen=True, eq=False)
class RioDesign:
    geodesic: GeodesicTrajectory
    pulse: HyperGaussianSpec | SquarePulse
    time_grid: np.ndarray
    partial_area: np.ndarray
    theta: np.ndarray
    gamma: np.ndarray
    varphi: np.ndarray
    controls: ControlWaveforms

    @property
    def gamma_of_t(self) -> np.ndarray:
        return self.gamma

    def rates(self):
        """(theta-dot, gamma-dot, varphi-dot) implied by the construction."""
        om = self.controls.rabi
        st = np.sin(self.theta)
        th_dot = om * np.sin(self.varphi)
        with np.errstate(divide="ignore", invalid="ignore"):
            ga_dot = np.where(st > 1e-300, om * np.cos(self.varphi) / st, 0.0)
        vp_dot = self.controls.detuning + ga_dot * np.cos(self.theta)
        return th_dot, ga_dot, vp_dot


def parametrize_by_pulse(
    g: GeodesicTrajectory,
    pulse: HyperGaussianSpec | SquarePulse,
    samples: int = 4001,
    window: tuple[float, float] | None = None,
    area_rtol: float = 1e-6,
    label: str = "hG-RIO",
) -> RioDesign:
    """Run along the robust curve at the speed set by ``pulse``.

    The partial pulse area ``int_{t_i}^t Omega`` equals the arc length
    travelled, so theta(t), gamma(t) follow by evaluating the curve there.
    Detuning is ``-Omega kappa`` with the curve's geodesic curvature; the
    Rabi frequency is the pulse itself.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    if abs(pulse.area - g.area) > area_rtol * g.area:
        raise DesignError(f"pulse area {pulse.area:.10g} differs from geodesic area {g.area:.10g}")
    if window is None:
        h = pulse.half_window()
        window = (-h, h)
    t = np.linspace(window[0], window[1], samples)
    ell = pulse.cumulative_area(t) - pulse.cumulative_area(window[0])
    if np.any(np.diff(ell) < 0):
        raise DesignError("cumulative pulse area is not monotone")
    ell = np.clip(ell, 0.0, g.area)
    # area still to come, from the mirrored time (pulses are even): no cancellation
    rem = np.clip(pulse.cumulative_area(-t) - pulse.cumulative_area(-window[1]), 0.0, g.area)
    pts, tan = g.evaluate(ell)
    theta, gamma, varphi = chart_angles(pts, tan, GAMMA_I, g.gamma_final)
    # stay on the geodesic's gamma branch
    gamma += 2 * np.pi * np.round((np.interp(ell, g.ell, g.gamma) - gamma) / (2 * np.pi))
    north = ell <= POLE_PATCH
    south = rem <= POLE_PATCH
    theta[north], gamma[north], varphi[north] = ell[north], GAMMA_I, 0.5 * np.pi
    theta[south], gamma[south], varphi[south] = np.pi - rem[south], g.gamma_final, 0.5 * np.pi
    pts[north | south] = sphere_point(theta[north | south], gamma[north | south])
    rabi = np.asarray(pulse(t), dtype=float)
    detuning = -rabi * g.curvature(pts)
    controls = ControlWaveforms(t, rabi, detuning, label)
    return RioDesign(g, pulse, t, ell, theta, gamma, varphi, controls)


def hg_rio_design(
    g: GeodesicTrajectory,
    n: int = 14,
    omega0: float = 1.0,
    samples: int = 4001,
) -> RioDesign:
    """Hyper-Gaussian of order ``n`` and peak ``omega0`` with the geodesic's area."""
    pulse = hyper_gaussian_matched(n, omega0, g.area)
    return parametrize_by_pulse(g, pulse, samples, label=f"hG-RIO n={n}")


def square_rio_design(g: GeodesicTrajectory, omega0: float = 1.0, samples: int = 4001) -> RioDesign:
    """The time-optimal square pulse: duration area / omega0."""
    pulse = SquarePulse(omega0, g.area / omega0)
    return parametrize_by_pulse(g, pulse, samples, label="square RIO")
