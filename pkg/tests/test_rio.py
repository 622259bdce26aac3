import numpy as np
import pytest

from quasisquare import rio
from quasisquare.errors import DesignError
from quasisquare.model import (
    DynamicalAngles, HyperGaussianSpec, PerturbationParams, angles_to_controls, fd_derivative,
    hyper_gaussian_matched,
)
from quasisquare.robustness import f_integral
from quasisquare.tdse import final_infidelity, propagate


def test_geodesic_area_and_endpoint(geodesic):
    assert abs(geodesic.area - 5.84) <= 0.05
    assert 5.5 <= geodesic.area <= 6.2
    assert abs(geodesic.gamma_final - 5 * np.pi / 3) / (5 * np.pi / 3) <= 0.01


def test_geodesic_boundary_data(geodesic):
    assert geodesic.theta[0] == 0.0 and geodesic.theta[-1] == pytest.approx(np.pi, abs=1e-12)
    assert geodesic.gamma[0] == pytest.approx(np.pi / 2)
    assert abs(geodesic.varphi[1] - np.pi / 2) < 1e-3
    assert abs(geodesic.varphi[-2] - np.pi / 2) < 1e-3


def test_geodesic_gamma_monotone(geodesic):
    assert np.all(np.diff(geodesic.gamma_grid[1:-1]) > 0)


def test_theta_not_single_valued_in_gamma(geodesic):
    # the curve doubles back in theta, so arc length is the parametrization
    assert np.any(np.diff(geodesic.theta) < 0)


def test_residuals_converged(geodesic):
    assert max(abs(r) for r in geodesic.residuals) < 1e-6
    assert max(abs(r) for r in rio.robustness_residuals(geodesic)) < 1e-6


def test_all_seeds_reach_one_minimum(geodesic):
    assert len(geodesic.minima) == 1
    assert geodesic.solver_info["seeds"] and len(geodesic.solver_info["seeds"]) == 5


def test_bad_seed_converges_to_same_area(geodesic):
    g = rio.solve_geodesic(512, seeds=(np.pi,))
    assert abs(g.area - geodesic.area) / geodesic.area < 2e-3


def test_solver_input_validation():
    with pytest.raises(ValueError):
        rio.solve_geodesic(32)
    with pytest.raises(ValueError):
        rio.solve_geodesic(128, tol=0.0)


def test_flat_path_integral_is_pi_over_two():
    t = np.linspace(0, np.pi, 1001)
    z = rio.path_robustness_integral(t, t, np.full_like(t, 0.3))
    assert abs(abs(z) - np.pi / 2) < 1e-12


def _warped_path_integral(u, w, w_dot):
    # theta = pi s, gamma = 0.2 + 0.5 s along s = w(u), analytic rates
    s_ = w(u)
    return rio.path_robustness_integral(u, np.pi * s_, 0.2 + 0.5 * s_, np.pi * w_dot(u), 0.5 * w_dot(u))


def test_path_integral_parametrization_independent():
    u = np.linspace(0, 1, 4001)
    plain = _warped_path_integral(u, lambda x: x, np.ones_like)
    smooth = _warped_path_integral(u, lambda x: x * x * (3 - 2 * x), lambda x: 6 * x * (1 - x))
    assert abs(plain - smooth) < 1e-12


def test_geodesic_integral_from_sampled_angles(geodesic):
    # finite-difference rates on the chart angles of the dense curve
    s = np.linspace(0, geodesic.area, 8001)
    pts, tan = geodesic.evaluate(s)
    theta, gamma, _ = rio.chart_angles(pts, tan, rio.GAMMA_I, geodesic.gamma_final)
    assert abs(rio.path_robustness_integral(s, theta, gamma)) < 1e-6


def test_f_integral_matches_residuals(rio_design, geodesic):
    th_dot, ga_dot, _ = rio_design.rates()
    ang = DynamicalAngles(rio_design.theta, rio_design.varphi, rio_design.gamma, rio_design.time_grid)
    z = f_integral(ang, (th_dot, ga_dot), PerturbationParams(alpha=1.0))
    assert abs(z) < 1e-6
    assert abs(z.real - geodesic.residuals[0]) < 1e-6 and abs(z.imag - geodesic.residuals[1]) < 1e-6


def test_local_area_optimality_under_bumps(geodesic):
    L = geodesic.area
    s = np.linspace(0, L, 4001)
    P, T = geodesic.evaluate(s)
    N = np.cross(P, T)
    A0 = rio.polyline_area(P)
    C0 = rio.polyline_constraints(P)
    modes = np.stack([np.sin(np.pi * s / L), np.sin(2 * np.pi * s / L)])

    def curve(b):
        q = P + b[:, None] * N
        return q / np.linalg.norm(q, axis=1, keepdims=True)

    def project(b):
        c = np.zeros(2)
        for _ in range(8):
            r = rio.polyline_constraints(curve(b + c @ modes)) - C0
            J = np.empty((2, 2))
            for j in range(2):
                e = np.zeros(2)
                e[j] = 1e-7
                J[:, j] = (rio.polyline_constraints(curve(b + (c + e) @ modes)) - C0 - r) / 1e-7
            c -= np.linalg.solve(J, r)
        return curve(b + c @ modes)

    rng = np.random.default_rng(2024)
    for _ in range(50):
        a = rng.normal(size=6)
        b = sum(a[k] * np.sin((k + 1) * np.pi * s / L) for k in range(6))
        b *= 1e-3 / np.max(np.abs(b))
        q = project(b)
        assert np.max(np.abs(rio.polyline_constraints(q) - C0)) < 1e-12
        assert rio.polyline_area(q) - A0 >= -1e-6


def test_square_pulse_constant_of_motion(geodesic):
    d = rio.square_rio_design(geodesic, 1.0, 4001)
    assert d.time_grid[-1] - d.time_grid[0] == pytest.approx(geodesic.area)
    t = d.time_grid
    th_dot = fd_derivative(t, d.theta)
    ga_dot = fd_derivative(t, d.gamma)
    com = th_dot ** 2 + ga_dot ** 2 * np.sin(d.theta) ** 2
    assert np.max(np.abs(com[40:-40] - 1.0)) < 1e-6


def test_hg_design_controls(rio_design, geodesic):
    c = rio_design.controls
    pulse = rio_design.pulse
    assert pulse.width == pytest.approx(1.095, rel=0.01)
    assert np.max(np.abs(c.rabi - pulse(c.time_grid))) <= 1e-10 * pulse.peak
    assert abs(c.pulse_area() - geodesic.area) / geodesic.area < 1e-6
    # monotone up to dense-output noise amplified by 1/sin(theta) next to the poles
    assert np.all(np.diff(rio_design.gamma_of_t) >= -1e-9)


def test_hg_closed_loop_and_plateau(rio_design):
    c = rio_design.controls
    assert final_infidelity(c) < 1e-6
    grid = np.linspace(c.time_grid[0], c.time_grid[-1], 2001)
    traj = propagate(c, output_grid=grid)
    centre = np.abs(grid) <= 0.3 * rio_design.pulse.width
    assert np.max(np.abs(traj.populations[centre, 1] - 0.5)) < 0.1


def test_fd_inverse_cross_check(rio_design):
    # independent route: finite-difference inversion of the sampled angles
    d = rio.hg_rio_design(rio_design.geodesic, 14, 2.77, 2001)
    c = angles_to_controls(d.time_grid, d.theta, d.gamma)
    assert np.max(np.abs(c.rabi - d.controls.rabi)) / d.pulse.peak < 1e-7
    traj = propagate(c)
    assert abs(2 * np.arctan2(abs(traj.final_state[1]), abs(traj.final_state[0])) - np.pi) < 1e-6


def test_area_mismatch_is_rejected(geodesic):
    with pytest.raises(DesignError):
        rio.parametrize_by_pulse(geodesic, HyperGaussianSpec(1.0, 1.0, 14))
    with pytest.raises(ValueError):
        rio.parametrize_by_pulse(geodesic, hyper_gaussian_matched(14, 1.0, geodesic.area), samples=1)
