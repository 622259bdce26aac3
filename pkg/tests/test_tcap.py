import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasisquare import tcap
from quasisquare.errors import DesignError

WINDOW = (-4.0, 4.0)


def test_parallel_controls_points(base):
    om, de = tcap.parallel_controls(*base, 0.0)
    assert om == base[0] and de == 0.0
    om, de = tcap.parallel_controls(*base, np.array([-50.0, 50.0]))
    assert np.allclose(om, 0.0) and np.allclose(de, [-base[0], base[0]])


def test_parallel_gap_constant(base):
    t = np.linspace(-6, 6, 100001)
    om, de = tcap.parallel_controls(*base, t)
    assert np.max(np.abs(np.hypot(om, de) - base[0])) / base[0] < 1e-12


@given(st.floats(-10, 10, allow_nan=False))
def test_adiabatic_frame_convention(t):
    om, de = tcap.parallel_controls(2.0, 1.0, t)
    fr = tcap.AdiabaticFrame.from_controls(om, de)
    assert 0.0 <= fr.mixing <= np.pi
    assert fr.gap == pytest.approx(2.0, rel=1e-14)


def test_sine_constraint_value():
    assert tcap.sine_constraint(3.0, WINDOW) == pytest.approx(-8 / (3 * np.pi), rel=1e-15)


def test_sine_identity_and_endpoints():
    g, gp = tcap.sine_expansion_g(1.0, np.zeros(3), WINDOW, np.linspace(-4, 4, 9))
    assert np.array_equal(g, np.linspace(-4, 4, 9)) and np.all(gp == 1.0)
    need = tcap.sine_constraint(3.0, WINDOW)
    coeffs = np.array([0.1, -0.05, need / 3])  # 0.1 - 2 * 0.05 cancels
    r = tcap.RescaleFunction("sine_expansion", {"coeffs": coeffs}, 3.0, WINDOW)
    assert r.boundary_violation() < 1e-12


def test_sine_constraint_violation():
    with pytest.raises(DesignError):
        tcap.sine_expansion_g(3.0, [0.1, 0.2], WINDOW, 0.0)


def test_non_monotone_sine_is_rejected():
    need = tcap.sine_constraint(3.0, WINDOW)
    with pytest.raises(DesignError):
        tcap.sine_rescale([need - 2 * 2.0, 2.0], 3.0, WINDOW)


def test_optimizer_identity_for_no_contraction(base):
    fit = tcap.optimize_sine_coefficients(3, 1.0, base, WINDOW)
    assert np.all(fit.coeffs == 0.0)
    with pytest.raises(ValueError):
        tcap.optimize_sine_coefficients(1, 3.0, base, WINDOW)


def test_sine_peak_decreases_with_N(sine_designs, hg_design):
    peaks = [sine_designs[N].info["peak"] for N in (2, 3, 6)]
    assert peaks[0] > peaks[1] > peaks[2]
    assert hg_design.pulse.peak < peaks[0]
    for d in sine_designs.values():
        assert d.info["peak"] <= d.info["seed_peak"]


def test_sine_N6_grid_refinement_oracle(sine_designs, base):
    d = sine_designs[6]
    coeffs = np.asarray(d.info["coeffs"])
    need = tcap.sine_constraint(3.0, WINDOW)
    tau = np.linspace(-4 / 3, 4 / 3, 16384)
    best = tcap._contracted_peak(coeffs, 3.0, base, WINDOW, tau)
    h = 1e-3 * abs(need)
    for steps in itertools.product((-1, 0, 1), repeat=5):
        free = coeffs[:5] + h * np.array(steps)
        c = tcap._close_coeffs(free, 6, need)
        assert tcap._contracted_peak(c, 3.0, base, WINDOW, tau) >= best * (1 - 1e-3)


@pytest.mark.parametrize("N", [2, 3, 6])
def test_sine_design_invariants(sine_designs, base, N):
    d = sine_designs[N]
    r = d.rescale
    assert r.boundary_violation() < 1e-10
    assert r.is_monotone()
    orig = tcap.parallel_waveforms(base, WINDOW, d.controls.time_grid.size)
    assert abs(d.controls.pulse_area() - orig.pulse_area()) / orig.pulse_area() < 1e-6
    assert tcap.rescaling_equivalence_check(base, r) < 1e-6


def test_rescaled_gap_is_scaled_base_gap(sine_designs, hg_design, base):
    for d in (*sine_designs.values(), hg_design):
        c = d.controls
        gp = d.rescale.derivative(c.time_grid)
        assert np.max(np.abs(np.hypot(c.rabi, c.detuning) - base[0] * gp)) < 1e-10 * base[0]


def test_hg_closed_forms(hg_design, base):
    assert abs(hg_design.pulse.width - 1.095) / 1.095 <= 0.01
    assert abs(hg_design.pulse.peak / base[0] - 0.84) / 0.84 <= 0.01
    assert hg_design.info["iterations"] < tcap.FIXED_POINT_MAX_ITER


def test_hg_rescale_invariants(hg_design, base):
    r = hg_design.rescale
    assert r.boundary_violation() < 1e-10
    assert r.is_monotone()
    tau = np.linspace(0, 4 / 3, 2001)
    assert np.max(np.abs(r(tau) + r(-tau))) < 1e-10
    assert r(0.0) == 0.0
    assert tcap.rescaling_equivalence_check(base, r) < 1e-6
    orig = tcap.parallel_waveforms(base, WINDOW, hg_design.controls.time_grid.size)
    assert abs(hg_design.controls.pulse_area() - orig.pulse_area()) / orig.pulse_area() < 1e-6


def test_hg_pulse_is_hyper_gaussian(hg_design):
    c = hg_design.controls
    spec = hg_design.pulse
    inside = np.abs(c.time_grid) <= 1.3 * spec.width
    ref = spec(c.time_grid[inside])
    assert np.max(np.abs(c.rabi[inside] - ref) / ref) < 1e-8


def test_hg_detuning_edge_bumps(hg_design):
    c = hg_design.controls
    k = int(np.argmax(np.abs(c.detuning)))
    assert abs(c.time_grid[k]) > hg_design.pulse.width
    # slow chirp through resonance in the middle
    mid = np.abs(c.time_grid) < 0.5 * hg_design.pulse.width
    assert np.max(np.abs(c.detuning[mid])) < 0.5 * np.max(np.abs(c.detuning))


def test_identity_rescale(base):
    r = tcap.identity_rescale(WINDOW)
    c = tcap.rescaled_controls(base, r, 801)
    o = tcap.parallel_waveforms(base, WINDOW, 801)
    assert np.array_equal(c.rabi, o.rabi) and np.array_equal(c.detuning, o.detuning)
    assert tcap.rescaling_equivalence_check(base, r) < 1e-12


def test_hg_rescale_validation(base):
    with pytest.raises(ValueError):
        tcap.hg_rescale(13, 3.0, 4.0, base)
    with pytest.raises(ValueError):
        tcap.hg_rescale(14, 1.0, 4.0, base)


@settings(max_examples=15, deadline=None)
@given(st.floats(1.5, 4.0))
def test_hg_rescale_boundaries_across_contractions(a):
    base = (tcap.default_base_peak(), 1.0)
    r, spec = tcap.hg_rescale(14, a, 4.0, base)
    assert r.boundary_violation() < 1e-10
    assert r.is_monotone(2000)
