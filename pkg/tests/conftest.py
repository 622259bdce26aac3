"""Shared, session-scoped designs (the geodesic and the sine optimizations are the slow parts)."""
import numpy as np
import pytest

from quasisquare import rio, tcap

RIO_PEAK = 2.77
WINDOW = (-4.0, 4.0)


@pytest.fixture(scope="session")
def geodesic():
    return rio.solve_geodesic(512)


@pytest.fixture(scope="session")
def rio_design(geodesic):
    return rio.hg_rio_design(geodesic, 14, RIO_PEAK, 4001)


@pytest.fixture(scope="session")
def base():
    return (tcap.default_base_peak(5.84, 1.0), 1.0)


@pytest.fixture(scope="session")
def hg_design(base):
    return tcap.design_hg(14, 3.0, base, 4.0)


@pytest.fixture(scope="session")
def sine_designs(base):
    return {N: tcap.design_sine(N, 3.0, base, WINDOW) for N in (2, 3, 6)}


@pytest.fixture(scope="session")
def flat_pi():
    from quasisquare.model import ControlWaveforms

    t = np.linspace(0.0, np.pi, 2001)
    return ControlWaveforms(t, np.ones_like(t), np.zeros_like(t), "flat pi")


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_lines():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
