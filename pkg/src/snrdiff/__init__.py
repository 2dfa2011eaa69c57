"""Desk-scale diffusion training and diagnostics toolkit.

Trains small denoisers on 2D toy distributions under different per-timestep
loss-weighting strategies and measures how the choice propagates into x0-space
estimation bias and few-step sampling quality.
"""

__version__ = "0.1.0"

from .schedule import (  # noqa: F401
    NoiseSchedule,
    PosteriorCoeffs,
    RespacedSchedule,
    amplification_coeff,
    build_linear,
    posterior_coeffs,
    respace,
    snr,
    vlb_weight,
)
from .weighting import WeightKind, WeightStrategy, weight  # noqa: F401
