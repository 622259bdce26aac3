"""Two-level model: Hamiltonian, dynamical-angle parametrization, inverse controls.

Units are dimensionless with hbar = 1. The state is parametrized by the
mixing angle theta, the internal phase varphi and the global phase gamma::

    psi = exp(-i gamma / 2) * [exp(+i varphi / 2) cos(theta / 2),
                               exp(-i varphi / 2) sin(theta / 2)]

which evolves under ``H = 1/2 [[-Delta, Omega], [Omega, Delta]]`` as

    theta' = Omega sin(varphi)
    varphi' = Delta + Omega cos(varphi) cot(theta)
    gamma' = Omega cos(varphi) / sin(theta)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import specfun
from .errors import DegenerateTrajectoryError, DesignError

GROUND = np.array([1.0 + 0.0j, 0.0 + 0.0j])
EXCITED = np.array([0.0 + 0.0j, 1.0 + 0.0j])

QUIET_RATE = 1e-8  # relative speed below which varphi is pinned to pi/2


@dataclass(frozen=True)
class PerturbationParams:
    """Static errors: relative Rabi amplitude ``alpha``, detuning offset
    ``delta`` and transverse offset ``beta``."""

    alpha: float = 0.0
    delta: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "delta", "beta"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"perturbation {name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)

    @classmethod
    def along(cls, axis: str, value: float) -> "PerturbationParams":
        if axis not in ("alpha", "delta", "beta"):
            raise ValueError(f"unknown perturbation axis {axis!r}")
        return cls(**{axis: value})

    def is_zero(self) -> bool:
        return self.alpha == 0.0 and self.delta == 0.0 and self.beta == 0.0


@dataclass(frozen=True, eq=False)
class ControlWaveforms:
    """Sampled controls (Omega, Delta) on a strictly increasing time grid."""

    time_grid: np.ndarray
    rabi: np.ndarray
    detuning: np.ndarray
    label: str = ""

    def __post_init__(self):
        t = np.ascontiguousarray(self.time_grid, dtype=float)
        om = np.ascontiguousarray(self.rabi, dtype=float)
        de = np.ascontiguousarray(self.detuning, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("time_grid must be 1-D with at least two samples")
        if om.shape != t.shape or de.shape != t.shape:
            raise ValueError("time_grid, rabi and detuning must share one length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(om)) and np.all(np.isfinite(de))):
            raise ValueError("controls contain non-finite samples")
        if np.any(np.diff(t) <= 0):
            raise ValueError("time_grid must be strictly increasing")
        if np.any(om < 0):
            raise ValueError("rabi must be non-negative")
        for arr in (t, om, de):
            arr.setflags(write=False)
        object.__setattr__(self, "time_grid", t)
        object.__setattr__(self, "rabi", om)
        object.__setattr__(self, "detuning", de)

    @property
    def duration(self) -> float:
        return float(self.time_grid[-1] - self.time_grid[0])

    def splines(self) -> tuple[CubicSpline, CubicSpline]:
        """Not-a-knot cubic interpolants used by the propagators."""
        return CubicSpline(self.time_grid, self.rabi), CubicSpline(self.time_grid, self.detuning)

    def pulse_area(self) -> float:
        om, _ = self.splines()
        return float(om.integrate(self.time_grid[0], self.time_grid[-1]))

    def laser_phase(self) -> np.ndarray:
        """phi_laser(t) = int_{t_i}^t Delta(s) ds on the grid."""
        _, de = self.splines()
        return de.antiderivative()(self.time_grid) - de.antiderivative()(self.time_grid[0])

    def peak(self) -> float:
        return float(np.max(self.rabi))

    def with_label(self, label: str) -> "ControlWaveforms":
        return ControlWaveforms(self.time_grid, self.rabi, self.detuning, label)


@dataclass(frozen=True, eq=False)
class DynamicalAngles:
    """Angles (theta, varphi, gamma); scalars or equally shaped arrays."""

    theta: np.ndarray | float
    varphi: np.ndarray | float
    gamma: np.ndarray | float
    time_grid: np.ndarray | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "theta", np.clip(self.theta, 0.0, np.pi))


@dataclass(frozen=True)
class HyperGaussianSpec:
    """Omega(t) = peak * exp(-(t / width)^order), order even."""

    peak: float
    width: float
    order: int

    def __post_init__(self):
        if not (self.peak > 0 and self.width > 0):
            raise ValueError("hyper-Gaussian peak and width must be positive")
        if int(self.order) != self.order or self.order < 2 or self.order % 2:
            raise ValueError(f"hyper-Gaussian order must be an even integer >= 2, got {self.order!r}")
        object.__setattr__(self, "order", int(self.order))

    @property
    def area(self) -> float:
        n = self.order
        return 2.0 * self.peak * self.width * specfun.gamma(1.0 / n) / n

    def __call__(self, t):
        return hyper_gaussian_value(self, t)

    def cumulative_area(self, t):
        """int_{-inf}^t Omega(s) ds, through the incomplete gamma function."""
        n = self.order
        s = 1.0 / n
        t = np.asarray(t, dtype=float)
        x = np.abs(t / self.width) ** n
        half = self.peak * self.width / n
        tail = half * np.vectorize(specfun.upper_incomplete_gamma, otypes=[float])(s, x)
        full = half * specfun.gamma(s)
        out = np.where(t >= 0, 2.0 * full - tail, tail)
        return out if out.ndim else float(out)

    def half_window(self, eps: float = 1e-17) -> float:
        """|t| beyond which Omega / peak < eps."""
        return self.width * (-np.log(eps)) ** (1.0 / self.order)


@dataclass(frozen=True)
class SquarePulse:
    """Constant pulse of amplitude ``peak`` on [-duration/2, duration/2]."""

    peak: float
    duration: float

    @property
    def area(self) -> float:
        return self.peak * self.duration

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(np.abs(t) <= 0.5 * self.duration, self.peak, 0.0)
        return out if out.ndim else float(out)

    def cumulative_area(self, t):
        t = np.clip(np.asarray(t, dtype=float), -0.5 * self.duration, 0.5 * self.duration)
        out = self.peak * (t + 0.5 * self.duration)
        return out if out.ndim else float(out)

    def half_window(self, eps: float = 0.0) -> float:
        return 0.5 * self.duration


def hamiltonian_matrix(omega: float, delta_ctrl: float, p: PerturbationParams = PerturbationParams()):
    """Perturbed two-level Hamiltonian (hbar = 1)."""
    w = 0.5 * ((1.0 + p.alpha) * omega + p.beta)
    d = 0.5 * (delta_ctrl + p.delta)
    return np.array([[-d, w], [w, d]], dtype=complex)


def angles_to_state(a: DynamicalAngles) -> np.ndarray:
    """State vector(s) with the components along the last axis."""
    th = np.asarray(a.theta, dtype=float)
    vp = np.asarray(a.varphi, dtype=float)
    ga = np.asarray(a.gamma, dtype=float)
    c1 = np.exp(0.5j * (vp - ga)) * np.cos(0.5 * th)
    c2 = np.exp(-0.5j * (vp + ga)) * np.sin(0.5 * th)
    return np.stack([c1, c2], axis=-1)


def fd_derivative(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Fourth-order finite differences; one-sided five-point stencils at the ends.

    Non-uniform grids fall back to second-order ``np.gradient``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    n = t.size
    h = np.diff(t)
    if n < 5 or not np.allclose(h, h[0], rtol=1e-9, atol=0.0):
        return np.gradient(y, t, edge_order=2)
    h = h[0]
    d = np.empty_like(y)
    d[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)
    d[0] = (-25 * y[0] + 48 * y[1] - 36 * y[2] + 16 * y[3] - 3 * y[4]) / (12 * h)
    d[1] = (-3 * y[0] - 10 * y[1] + 18 * y[2] - 6 * y[3] + y[4]) / (12 * h)
    d[-1] = (25 * y[-1] - 48 * y[-2] + 36 * y[-3] - 16 * y[-4] + 3 * y[-5]) / (12 * h)
    d[-2] = (3 * y[-1] + 10 * y[-2] - 18 * y[-3] + 6 * y[-4] - y[-5]) / (12 * h)
    return d


def controls_from_rates(theta, theta_dot, gamma_dot, varphi_dot):
    """Inverse map: Omega = sqrt(theta'^2 + gamma'^2 sin^2 theta), Delta = varphi' - gamma' cos theta."""
    theta = np.asarray(theta, dtype=float)
    st = np.sin(theta)
    rabi = np.hypot(theta_dot, gamma_dot * st)
    detuning = np.asarray(varphi_dot) - np.asarray(gamma_dot) * np.cos(theta)
    return rabi, detuning


def internal_phase(theta, theta_dot, gamma_dot):
    """varphi from cot(varphi) = gamma' sin(theta) / theta' with sin(varphi) following theta'."""
    return np.arctan2(theta_dot, np.asarray(gamma_dot) * np.sin(theta))


def angles_to_controls(t, theta, gamma, label: str = "inverse") -> ControlWaveforms:
    """Controls that drive the sampled angle trajectory (theta(t), gamma(t)).

    Rates come from fourth-order finite differences. varphi is pinned to
    pi/2 at an end that sits on a pole, where cot(varphi) is 0/0, and Delta there uses the
    one-sided differences of varphi. Two consecutive interior samples where
    both theta' and gamma' sin(theta) vanish away from the poles leave
    varphi undefined and raise ``DegenerateTrajectoryError``.
    """
    t = np.asarray(t, dtype=float)
    theta = np.asarray(theta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    th_dot = fd_derivative(t, theta)
    ga_dot = fd_derivative(t, gamma)
    transverse = ga_dot * np.sin(theta)
    still = np.hypot(th_dot, transverse) <= 1e-12 * max(1.0, float(np.max(np.abs(th_dot))))
    # resting at a pole is fine (pulse tails); stalling mid-path is not
    still &= np.sin(theta) > 1e-6
    interior = still[1:-1]
    if np.any(interior[1:] & interior[:-1]):
        idx = int(np.nonzero(interior[1:] & interior[:-1])[0][0]) + 1
        raise DegenerateTrajectoryError(
            f"theta-dot and gamma-dot*sin(theta) both vanish near t={t[idx]:.6g}"
        )
    varphi = internal_phase(theta, th_dot, ga_dot)
    for end in (0, -1):
        if np.sin(theta[end]) <= 1e-6:
            varphi[end] = 0.5 * np.pi
    # where the state barely moves (pulse tails) varphi is numerical noise;
    # use its pole limit instead
    rate = np.hypot(th_dot, transverse)
    varphi[rate <= QUIET_RATE * float(np.max(rate))] = 0.5 * np.pi
    varphi = np.unwrap(varphi)
    vp_dot = fd_derivative(t, varphi)
    rabi, detuning = controls_from_rates(theta, th_dot, ga_dot, vp_dot)
    return ControlWaveforms(t, rabi, detuning, label)


def hyper_gaussian_value(spec: HyperGaussianSpec, t):
    t = np.asarray(t, dtype=float)
    out = spec.peak * np.exp(-np.abs(t / spec.width) ** spec.order)
    return out if out.ndim else float(out)


def hyper_gaussian_matched(n: int, omega0: float, area: float) -> HyperGaussianSpec:
    """Hyper-Gaussian of peak ``omega0`` whose area equals ``area``."""
    if not (omega0 > 0 and area > 0):
        raise DesignError("omega0 and area must be positive")
    width = n * (area / omega0) / (2.0 * specfun.gamma(1.0 / n))
    return HyperGaussianSpec(peak=omega0, width=width, order=n)
