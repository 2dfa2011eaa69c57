"""Per-timestep loss weights w(t) for the compared training strategies.

All weights act on the eps-space squared error. inv_sqrt_snr equals the
amplification coefficient, so it grows monotonically with t; p2 and min_snr
instead start below constant at high SNR and converge to it as SNR drops.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import schedule as sched
from .errors import ConfigurationError


class WeightKind(enum.Enum):
    CONSTANT = "constant"
    INV_SQRT_SNR = "inv_sqrt_snr"
    INV_SNR = "inv_snr"
    P2 = "p2"
    MIN_SNR = "min_snr"
    VLB = "vlb"


@dataclass(frozen=True)
class WeightStrategy:
    """Tagged choice of weight rule; hyperparameters apply only to their kind."""

    kind: WeightKind
    p2_k: float = 1.0
    p2_gamma: float = 1.0
    minsnr_gamma: float = 5.0

    def __post_init__(self):
        if self.kind is WeightKind.P2 and (self.p2_k <= 0.0 or self.p2_gamma <= 0.0):
            raise ConfigurationError(
                f"p2_k and p2_gamma must be positive, got {self.p2_k}, {self.p2_gamma}"
            )
        if self.kind is WeightKind.MIN_SNR and self.minsnr_gamma <= 0.0:
            raise ConfigurationError(f"minsnr_gamma must be positive, got {self.minsnr_gamma}")

    @property
    def label(self) -> str:
        return self.kind.value


def parse_weight_kind(name: str) -> WeightKind:
    try:
        return WeightKind(name.strip().lower())
    except ValueError:
        valid = ", ".join(k.value for k in WeightKind)
        raise ConfigurationError(f"unknown weight kind {name!r}; expected one of: {valid}") from None


def weight(strategy: WeightStrategy, s: sched.NoiseSchedule, t):
    """w(t) for t scalar or array; strictly positive and finite for valid schedules."""
    t = np.asarray(t)
    kind = strategy.kind
    if kind is WeightKind.CONSTANT:
        return np.ones(t.shape, dtype=np.float64) if t.ndim else np.float64(1.0)
    if kind is WeightKind.VLB:
        return sched.vlb_weight(s, t)
    r = sched.snr(s, t)
    if kind is WeightKind.INV_SQRT_SNR:
        return 1.0 / np.sqrt(r)
    if kind is WeightKind.INV_SNR:
        return 1.0 / r
    if kind is WeightKind.P2:
        return 1.0 / (strategy.p2_k + r) ** strategy.p2_gamma
    if kind is WeightKind.MIN_SNR:
        return np.minimum(r, strategy.minsnr_gamma) / r
    raise ConfigurationError(f"unhandled weight kind {kind}")
