"""Time-contracted adiabatic passage.

A parallel adiabatic passage (constant eigenvalue gap) on ``[t_i, t_f]`` is
replayed on ``[t_i/a, t_f/a]`` through a monotone time map ``t = g(tau)``.
The controls ``Omega_c = g' Omega(g)`` and ``Delta_c = g' Delta(g)`` produce
exactly ``psi_r(tau) = psi(g(tau))``, so the final state is unchanged and,
because ``g' = 1`` at both ends, so are the boundary controls.

Two families of ``g`` are provided: a linear term plus a sine series whose
coefficients minimize the contracted peak, and the map that turns the
contracted pulse into a hyper-Gaussian.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import specfun
from .errors import ConvergenceError, DesignError
from .model import ControlWaveforms, HyperGaussianSpec, PerturbationParams
from .tdse import propagate

log = logging.getLogger(__name__)

DEFAULT_WINDOW_HALF = 4.0  # t_f = 4T: Lambda(t_f/T) = e^-16
PEAK_GRID = 4096
FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITER = 200


def envelope(x):
    """Base shape Lambda(x) = exp(-x^2)."""
    return np.exp(-np.square(x))


@dataclass(frozen=True)
class AdiabaticFrame:
    mixing: float
    gap: float

    @classmethod
    def from_controls(cls, omega, delta) -> "AdiabaticFrame":
        return cls(float(np.arctan2(omega, -delta)), float(np.hypot(omega, delta)))


def parallel_controls(peak: float, width: float, t):
    """Gaussian Rabi pulse with the detuning that keeps the gap at ``peak``."""
    if not width > 0:
        raise ValueError("width must be positive")
    x = np.asarray(t, dtype=float) / width
    om = peak * envelope(x)
    # 1 - Lambda^2 = -expm1(-2x^2) keeps full relative precision near t = 0
    de = peak * np.sign(x) * np.sqrt(-np.expm1(-2.0 * x * x))
    return om, de


@dataclass(frozen=True, eq=False)
class RescaleFunction:
    """Monotone time map g: [t_i/a, t_f/a] -> [t_i, t_f].

    ``kind`` is one of ``identity``, ``sine_expansion`` (params: ``coeffs``)
    or ``hyper_gaussian_inversion`` (params: ``order``, ``sigma``, ``peak``,
    ``base_peak``, ``base_width``, ``c0``, ``k``).
    """

    kind: str
    params: dict
    contraction: float
    window: tuple[float, float]

    @property
    def tau_window(self) -> tuple[float, float]:
        return self.window[0] / self.contraction, self.window[1] / self.contraction

    def __call__(self, tau):
        return self.evaluate(tau)[0]

    def derivative(self, tau):
        return self.evaluate(tau)[1]

    def evaluate(self, tau):
        """(g(tau), g'(tau))."""
        tau = np.asarray(tau, dtype=float)
        if self.kind == "identity":
            return tau.copy(), np.ones_like(tau)
        if self.kind == "sine_expansion":
            return sine_expansion_g(self.contraction, self.params["coeffs"], self.window, tau)
        if self.kind == "hyper_gaussian_inversion":
            return _hg_g(self.params, tau)
        raise ValueError(f"unknown rescale kind {self.kind!r}")

    def boundary_violation(self) -> float:
        """Largest violation of g(t_i/a)=t_i, g(t_f/a)=t_f, g'=1 at both ends."""
        lo, hi = self.tau_window
        g, gp = self.evaluate(np.array([lo, hi]))
        return float(max(abs(g[0] - self.window[0]), abs(g[1] - self.window[1]),
                         abs(gp[0] - 1.0), abs(gp[1] - 1.0)))

    def is_monotone(self, points: int = 10_000) -> bool:
        lo, hi = self.tau_window
        return bool(np.all(self.derivative(np.linspace(lo, hi, points)) > 0))


def identity_rescale(window=(-DEFAULT_WINDOW_HALF, DEFAULT_WINDOW_HALF)) -> RescaleFunction:
    return RescaleFunction("identity", {}, 1.0, tuple(window))


# ---------------------------------------------------------------------------
# sine expansion


def sine_constraint(contraction: float, window) -> float:
    """Required value of sum n C_n."""
    ti, tf = window
    return (1.0 - contraction) * (tf - ti) / (2.0 * np.pi * contraction)


def sine_expansion_g(contraction: float, coeffs, window, tau):
    """g = a tau + sum C_n sin(2 n pi a (tau - t_i/a) / (t_f - t_i)) and its derivative."""
    a = float(contraction)
    ti, tf = window
    c = np.asarray(coeffs, dtype=float)
    need = sine_constraint(a, window)
    n = np.arange(1, c.size + 1)
    if abs(np.dot(n, c) - need) > 1e-12 * max(1.0, abs(need)):
        raise DesignError(f"sine coefficients violate sum n C_n = {need:.15g} (got {np.dot(n, c):.15g})")
    tau = np.asarray(tau, dtype=float)
    k = 2.0 * np.pi * a / (tf - ti)
    arg = k * np.multiply.outer(tau - ti / a, n)
    g = a * tau + np.sin(arg) @ c
    gp = a + np.cos(arg) @ (c * n * k)
    return g, gp


def _close_coeffs(free, N, need):
    """Append C_N so that sum n C_n = need."""
    n = np.arange(1, N)
    return np.concatenate([free, [(need - np.dot(n, free)) / N]])


def _contracted_peak(coeffs, a, base, window, tau):
    g, gp = sine_expansion_g(a, coeffs, window, tau)
    if np.any(gp <= 0):
        return np.inf
    peak, width = base
    return float(np.max(peak * gp * envelope(g / width)))


@dataclass(frozen=True)
class SineFit:
    coeffs: np.ndarray
    peak: float
    seed_peak: float
    evaluations: int


def optimize_sine_coefficients(
    N: int,
    contraction: float,
    base: tuple[float, float],
    window=None,
    grid: int = PEAK_GRID,
    restarts: int = 8,
) -> SineFit:
    """Coefficients C_1..C_N minimizing the contracted peak amplitude.

    Nelder-Mead over C_1..C_{N-1} (C_N closes the endpoint constraint), with
    non-monotone maps rejected. Restarts from the incumbent until a pass no
    longer improves it. ``contraction == 1`` returns the identity.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    if contraction < 1:
        raise ValueError("contraction must be >= 1")
    window = _default_window(base, window)
    need = sine_constraint(contraction, window)
    if contraction == 1.0:
        z = np.zeros(N)
        p = _contracted_peak(z, 1.0, base, window, np.linspace(*window, grid))
        return SineFit(z, p, p, 1)
    lo, hi = window[0] / contraction, window[1] / contraction
    tau = np.linspace(lo, hi, grid)
    seed = need / (N * np.arange(1, N + 1))
    best = {"peak": _contracted_peak(seed, contraction, base, window, tau), "coeffs": seed}
    seed_peak = best["peak"]
    count = [0]

    def objective(free):
        c = _close_coeffs(free, N, need)
        count[0] += 1
        val = _contracted_peak(c, contraction, base, window, tau)
        if val < best["peak"]:
            best["peak"], best["coeffs"] = val, c
        return val

    scale = max(abs(need), 1e-3)
    for _ in range(restarts):
        start = best["peak"]
        x0 = best["coeffs"][:-1]
        simplex = np.vstack([x0] + [x0 + 0.25 * scale * e for e in np.eye(N - 1)])
        minimize(objective, x0, method="Nelder-Mead",
                 options={"initial_simplex": simplex, "xatol": 1e-10, "fatol": 1e-12,
                          "maxiter": 4000 * N, "maxfev": 4000 * N})
        if start - best["peak"] <= 1e-10 * start:
            break
    if not np.isfinite(best["peak"]):
        raise DesignError("no monotone rescaling found")
    if best["peak"] > seed_peak:
        raise ConvergenceError("optimizer did not improve on the seed", {"seed_peak": seed_peak})
    return SineFit(best["coeffs"], best["peak"], seed_peak, count[0])


def sine_rescale(coeffs, contraction: float, window) -> RescaleFunction:
    r = RescaleFunction("sine_expansion", {"coeffs": np.asarray(coeffs, dtype=float)},
                        float(contraction), tuple(window))
    if not r.is_monotone():
        raise DesignError("sine rescaling is not monotone")
    return r


# ---------------------------------------------------------------------------
# hyper-Gaussian inversion


def _hg_g(params, tau):
    """Odd map solving Omega_tilde int_0^g Lambda = Omega_hat int_0^tau exp(-(s/sigma)^n).

    For tau >= 0: erfc(g/T) = c0 + k Gamma(1/n, (tau/sigma)^n). The
    complementary form keeps full relative accuracy where g/T is large.
    """
    n, sigma, T = params["order"], params["sigma"], params["base_width"]
    s = 1.0 / n
    tau = np.asarray(tau, dtype=float)
    x = np.abs(tau / sigma) ** n
    arg = params["c0"] + params["k"] * specfun.regularized_upper_gamma_array(s, x) * specfun.gamma(s)
    mag = T * specfun.erfc_inv_array(arg)
    g = np.sign(tau) * mag
    gp = params["peak"] * np.exp(-x) / (params["base_peak"] * np.exp(-(mag / T) ** 2))
    return g, gp


def hg_rescale(
    order: int,
    contraction: float,
    t_f: float,
    base: tuple[float, float],
    max_iter: int = FIXED_POINT_MAX_ITER,
    tol: float = FIXED_POINT_TOL,
) -> tuple[RescaleFunction, HyperGaussianSpec]:
    """Time map whose contracted pulse is the hyper-Gaussian Omega_hat exp(-(tau/sigma)^n).

    sigma and Omega_hat solve, by fixed-point iteration on sigma,

    * endpoint: g(t_f/a) = t_f, i.e. the partial areas of the window agree,
    * slope: g'(t_f/a) = 1, i.e. Omega_hat exp(-(t_f/(a sigma))^n) = Omega_tilde exp(-(t_f/T)^2).

    Both are imposed on the finite window, so the four boundary conditions
    hold to rounding.
    """
    if order < 2 or order % 2:
        raise ValueError("order must be an even integer >= 2")
    if not contraction > 1:
        raise ValueError("contraction must be > 1")
    if not t_f > 0:
        raise ValueError("t_f must be positive")
    peak0, T = base
    n = int(order)
    s = 1.0 / n
    gs = specfun.gamma(s)
    tau_f = t_f / contraction
    xi = t_f / T
    erf_f = specfun.erf(xi)
    erfc_f = specfun.erfc(xi)
    # infinite-window closed forms as the starting point
    ratio = 1.0
    sigma = tau_f / (np.log(ratio) + xi * xi) ** s
    for it in range(max_iter):
        x_f = (tau_f / sigma) ** n
        lower = gs - specfun.upper_incomplete_gamma(s, x_f)
        k = erf_f / lower
        peak = k * np.sqrt(np.pi) * T * peak0 * n / (2.0 * sigma)
        if peak <= peak0 * np.exp(-xi * xi):
            raise ConvergenceError("hyper-Gaussian rescaling has no consistent peak", {"iteration": it})
        new = tau_f / (np.log(peak / peak0) + xi * xi) ** s
        if abs(new - sigma) <= tol * sigma:
            sigma = new
            break
        sigma = new
    else:
        raise ConvergenceError("hyper-Gaussian rescaling fixed point did not converge",
                               {"sigma": sigma, "iterations": max_iter})
    x_f = (tau_f / sigma) ** n
    upper_f = specfun.upper_incomplete_gamma(s, x_f)
    lower = gs - upper_f
    k = erf_f / lower
    peak = k * np.sqrt(np.pi) * T * peak0 * n / (2.0 * sigma)
    c0 = (gs * erfc_f - upper_f) / lower
    if not c0 > 0:
        raise DesignError("window too short: inversion argument leaves (0, 2)")
    params = {"order": n, "sigma": float(sigma), "peak": float(peak), "base_peak": float(peak0),
              "base_width": float(T), "c0": float(c0), "k": float(k), "iterations": it + 1}
    r = RescaleFunction("hyper_gaussian_inversion", params, float(contraction), (-t_f, t_f))
    return r, HyperGaussianSpec(float(peak), float(sigma), n)


# ---------------------------------------------------------------------------
# controls


def _default_window(base, window):
    if window is None:
        return (-DEFAULT_WINDOW_HALF * base[1], DEFAULT_WINDOW_HALF * base[1])
    return tuple(float(w) for w in window)


def parallel_waveforms(base: tuple[float, float], window=None, samples: int = 8001, label="parallel"):
    window = _default_window(base, window)
    t = np.linspace(window[0], window[1], samples)
    om, de = parallel_controls(base[0], base[1], t)
    return ControlWaveforms(t, om, de, label)


def rescaled_controls(base: tuple[float, float], rescale: RescaleFunction, samples: int = 8001,
                      label: str | None = None) -> ControlWaveforms:
    """Omega_c = Omega_tilde g' Lambda(g/T), Delta_c = g' Delta(g) on the contracted window."""
    lo, hi = rescale.tau_window
    tau = np.linspace(lo, hi, samples)
    g, gp = rescale.evaluate(tau)
    om, de = parallel_controls(base[0], base[1], g)
    return ControlWaveforms(tau, gp * om, gp * de, label or f"TCAP {rescale.kind} a={rescale.contraction:g}")


@dataclass(frozen=True, eq=False)
class TcapDesign:
    base_peak: float
    base_width: float
    rescale: RescaleFunction
    controls: ControlWaveforms
    pulse: HyperGaussianSpec | None = None
    info: dict = field(default_factory=dict)

    @property
    def base(self) -> tuple[float, float]:
        return (self.base_peak, self.base_width)

    def base_area(self) -> float:
        return float(self.base_peak * self.base_width * np.sqrt(np.pi))


def default_base_peak(area: float = 5.84, width: float = 1.0) -> float:
    """Gaussian peak giving the requested area at width T."""
    return area / (width * np.sqrt(np.pi))


def design_sine(N: int, contraction: float, base, window=None, samples: int = 8001) -> TcapDesign:
    window = _default_window(base, window)
    fit = optimize_sine_coefficients(N, contraction, base, window)
    r = sine_rescale(fit.coeffs, contraction, window)
    c = rescaled_controls(base, r, samples, label=f"TCAP sine N={N} a={contraction:g}")
    return TcapDesign(base[0], base[1], r, c, None,
                      {"peak": fit.peak, "seed_peak": fit.seed_peak, "coeffs": fit.coeffs.tolist()})


def design_hg(order: int, contraction: float, base, t_f: float | None = None, samples: int = 8001) -> TcapDesign:
    t_f = DEFAULT_WINDOW_HALF * base[1] if t_f is None else t_f
    r, spec = hg_rescale(order, contraction, t_f, base)
    c = rescaled_controls(base, r, samples, label=f"hG-TCAP n={order} a={contraction:g}")
    return TcapDesign(base[0], base[1], r, c, spec,
                      {"sigma": spec.width, "peak": spec.peak, "peak_ratio": spec.peak / base[0],
                       "iterations": r.params["iterations"]})


def rescaling_equivalence_check(
    base: tuple[float, float],
    rescale: RescaleFunction,
    p: PerturbationParams = PerturbationParams(),
    samples: int = 8001,
    **propagate_kw,
) -> float:
    """||psi_r(t_f/a) - psi(t_f)|| with both final states from ``propagate``."""
    original = parallel_waveforms(base, rescale.window, samples)
    contracted = rescaled_controls(base, rescale, samples)
    ends = lambda c: c.time_grid[[0, -1]]
    psi = propagate(original, p, output_grid=ends(original), **propagate_kw).final_state
    psi_r = propagate(contracted, p, output_grid=ends(contracted), **propagate_kw).final_state
    return float(np.linalg.norm(psi_r - psi))
