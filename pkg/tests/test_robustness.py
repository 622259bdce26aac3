import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasisquare import rio, tcap
from quasisquare.errors import IntegrationError
from quasisquare.model import ControlWaveforms, DynamicalAngles, PerturbationParams
from quasisquare.robustness import (
    FitError, RobustnessCurve, error_integrand_e, error_integrand_f, f_integral, fidelity_scan,
    first_order_term, infidelity_fit, infidelity_slope, predicted_infidelity, rates_from_angles,
)
from quasisquare.tables import read_table, write_table
from quasisquare.tdse import final_infidelity

SLOPE_GRID = np.logspace(-3, -2, 9)
ZERO = PerturbationParams()


def test_e_examples():
    ang = DynamicalAngles(np.pi / 2, 0.3, 0.0)
    assert error_integrand_e(ang, (1.0, 2.0), ZERO) == 0.0
    assert error_integrand_e(ang, (1.0, 2.0), PerturbationParams(delta=1.0)) == pytest.approx(0.0, abs=1e-16)
    assert error_integrand_e(ang, (0.0, 2.0), PerturbationParams(alpha=1.0)) == pytest.approx(1.0)


def test_f_examples():
    ang = DynamicalAngles(0.7, np.pi / 2, 0.4)
    assert error_integrand_f(ang, (1.3, 0.0), ZERO) == 0.0
    f = error_integrand_f(ang, (1.3, 0.0), PerturbationParams(alpha=1.0))
    assert f == pytest.approx(-0.5j * 1.3 * np.exp(0.4j))


angle = st.floats(0, np.pi)
rate = st.floats(-5, 5)


@settings(max_examples=60)
@given(angle, st.floats(-np.pi, np.pi), st.floats(-10, 10), rate, rate,
       st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-3, 3))
def test_integrands_linear(th, vp, ga, thd, gad, a, d, b, s):
    ang = DynamicalAngles(th, vp, ga)
    p = PerturbationParams(a, d, b)
    ps = PerturbationParams(s * a, s * d, s * b)
    for fn in (error_integrand_e, error_integrand_f):
        assert abs(fn(ang, (thd, gad), ps) - s * fn(ang, (thd, gad), p)) <= 1e-12 * (1 + abs(fn(ang, (thd, gad), p)))


def test_first_order_term_zero_and_symmetric():
    t = np.linspace(0, 2, 2001)
    theta = np.pi * t / 2
    gamma = (t - 1) ** 2  # gamma-dot odd about the midpoint, sin^2 theta even
    ang = DynamicalAngles(theta, np.zeros_like(t), gamma, t)
    rates = rates_from_angles(ang)
    assert first_order_term(ang, rates, ZERO) == 0
    assert abs(first_order_term(ang, rates, PerturbationParams(alpha=1.0))) < 1e-12


def test_rates_need_grid():
    with pytest.raises(ValueError):
        rates_from_angles(DynamicalAngles(0.1, 0.2, 0.3))


def test_flat_pulse_prediction_is_exact_to_second_order():
    t = np.linspace(0, np.pi, 2001)
    ang = DynamicalAngles(t, np.full_like(t, np.pi / 2), np.zeros_like(t), t)
    z = f_integral(ang, rates_from_angles(ang), PerturbationParams(alpha=1.0))
    assert abs(abs(z) - np.pi / 2) < 1e-12


def test_f_integral_of_design_matches_geodesic_residuals(rio_design, geodesic):
    th_dot, ga_dot, _ = rio_design.rates()
    ang = DynamicalAngles(rio_design.theta, rio_design.varphi, rio_design.gamma, rio_design.time_grid)
    z = f_integral(ang, (th_dot, ga_dot), PerturbationParams(alpha=1.0))
    assert abs(z - complex(*rio.robustness_residuals(geodesic))) < 1e-6


def _consistency(controls, ang, rates):
    alphas = (1e-3, 2e-3, 4e-3)
    diff = [abs(final_infidelity(controls, PerturbationParams(alpha=a))
                - predicted_infidelity(ang, rates, PerturbationParams(alpha=a))) for a in alphas]
    C = diff[-1] / alphas[-1] ** 3
    return [d <= 1.05 * C * a ** 3 for d, a in zip(diff, alphas)]


def test_perturbative_consistency_rio(geodesic, rio_design):
    for d in (rio_design, rio.square_rio_design(geodesic, 1.0, 4001)):
        th_dot, ga_dot, _ = d.rates()
        ang = DynamicalAngles(d.theta, d.varphi, d.gamma, d.time_grid)
        assert all(_consistency(d.controls, ang, (th_dot, ga_dot)))


def test_perturbative_consistency_flat(flat_pi):
    t = flat_pi.time_grid
    ang = DynamicalAngles(t, np.full_like(t, np.pi / 2), np.zeros_like(t), t)
    assert all(_consistency(flat_pi, ang, rates_from_angles(ang)))


def test_flat_slope_two(flat_pi):
    assert abs(infidelity_slope(fidelity_scan(flat_pi, "alpha", SLOPE_GRID)) - 2.0) <= 0.1


def test_rio_slope_four(rio_design):
    fit = infidelity_fit(fidelity_scan(rio_design.controls, "alpha", SLOPE_GRID))
    assert 3.7 <= fit.slope <= 4.3
    assert fit.points == 9


def test_rio_not_robust_to_detuning(rio_design):
    slope = infidelity_slope(fidelity_scan(rio_design.controls, "delta", SLOPE_GRID))
    assert abs(slope - 2.0) < 0.1


def test_constant_curve_and_degenerate_fit():
    fit = infidelity_fit(RobustnessCurve("alpha", SLOPE_GRID, np.full(9, 1e-3)))
    assert abs(fit.slope) < 1e-12 and fit.stderr < 1e-12
    with pytest.raises(FitError):
        infidelity_fit(RobustnessCurve("alpha", [1e-3, 2e-3], [1e-6, 2e-6]))
    with pytest.raises(FitError):
        infidelity_fit(RobustnessCurve("alpha", SLOPE_GRID, np.zeros(9)))


def test_curve_validation():
    with pytest.raises(ValueError):
        RobustnessCurve("gamma", [0.0], [0.0])
    with pytest.raises(ValueError):
        RobustnessCurve("alpha", [0.1, 0.0], [0.0, 0.0])


def test_scan_at_zero_and_range(rio_design, hg_design):
    grid = np.linspace(-0.2, 0.2, 9)
    cv = fidelity_scan(rio_design.controls, "alpha", grid)
    assert cv.infidelity[4] < 1e-6
    assert np.all((cv.infidelity >= 0) & (cv.infidelity <= 1 + 1e-9))
    assert cv.pulse_area == pytest.approx(rio_design.geodesic.area, rel=1e-6)
    # the equal-area adiabatic passage keeps its finite adiabatic error, unchanged by contraction
    tc = fidelity_scan(hg_design.controls, "alpha", [0.0])
    base = tcap.parallel_waveforms(hg_design.base, hg_design.rescale.window)
    assert abs(tc.infidelity[0] - final_infidelity(base)) < 1e-9


def test_scan_deterministic_csv(rio_design, tmp_path):
    grid = np.linspace(-0.1, 0.1, 11)
    blobs = []
    for k in range(2):
        cv = fidelity_scan(rio_design.controls, "beta", grid)
        path = write_table(tmp_path / f"s{k}.csv", {"beta": cv.values, "infidelity": cv.infidelity})
        blobs.append(path.read_bytes())
    assert blobs[0] == blobs[1]
    assert np.array_equal(read_table(tmp_path / "s0.csv")["beta"], grid)


def test_scan_reports_offending_value():
    t = np.linspace(0, 1, 3)
    c = ControlWaveforms(t, np.full(3, 1e12), np.zeros(3))
    with pytest.raises(IntegrationError, match="alpha=0.5"):
        fidelity_scan(c, "alpha", [0.5])
    with pytest.raises(ValueError):
        fidelity_scan(c, "alpha", [np.nan])
