"""Pulse-area-robust population transfer in a two-level system with hyper-Gaussian pulses."""
from .model import (
    EXCITED,
    GROUND,
    ControlWaveforms,
    DynamicalAngles,
    HyperGaussianSpec,
    PerturbationParams,
    SquarePulse,
)
from .tdse import BACKEND, StateTrajectory, propagate, transfer_infidelity

__version__ = "0.1.0"
