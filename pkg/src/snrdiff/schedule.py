"""Noise schedules: beta sequences, cumulative signal fractions, SNR, and respacing.

Timesteps are 1-based (t = 1..T) to match the forward-process convention
x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) eps with abar_0 = 1 (clean data).
All arithmetic is float64: the amplification coefficient spans ~4 orders of
magnitude and the 1/SNR weight ~8, so float32 would contaminate the
identity-level tolerances used in tests.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class NoiseSchedule:
    """Diffusion schedule over T steps.

    betas[i] is beta at t = i+1. alpha_bars[i] is the running product
    prod_{s<=i+1} (1 - beta_s). The extended lookup table prepends
    abar_0 = 1 so queries accept t in 0..T.
    """

    T: int
    betas: np.ndarray
    alpha_bars: np.ndarray
    _abar_ext: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        abars = np.asarray(self.alpha_bars, dtype=np.float64)
        if self.T < 1:
            raise ConfigurationError(f"T must be >= 1, got {self.T}")
        if betas.shape != (self.T,) or abars.shape != (self.T,):
            raise ConfigurationError(
                f"betas/alpha_bars must have shape ({self.T},), got {betas.shape} and {abars.shape}"
            )
        if not ((betas > 0.0) & (betas < 1.0)).all():
            raise ConfigurationError("betas must lie strictly inside (0, 1)")
        if not ((abars > 0.0) & (abars < 1.0)).all():
            raise ConfigurationError("alpha_bars must lie strictly inside (0, 1)")
        ext = np.concatenate([[1.0], abars])
        if not (np.diff(ext) < 0.0).all():
            raise ConfigurationError("alpha_bars must be strictly decreasing")
        if not np.array_equal(ext[:-1] * (1.0 - betas), abars):
            raise ConfigurationError("alpha_bars must satisfy abar_t = abar_{t-1} * (1 - beta_t) exactly")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alpha_bars", abars)
        object.__setattr__(self, "_abar_ext", ext)

    def _check_t(self, t, lo: int = 1):
        t = np.asarray(t)
        if not np.issubdtype(t.dtype, np.integer):
            raise IndexError(f"timestep must be an integer, got dtype {t.dtype}")
        if t.size and (t.min() < lo or t.max() > self.T):
            raise IndexError(f"timestep out of range [{lo}, {self.T}]: got {t.min()}..{t.max()}")
        return t

    def beta(self, t):
        """beta_t for t in 1..T (scalar or array)."""
        t = self._check_t(t)
        return self.betas[t - 1]

    def alpha_bar(self, t):
        """abar_t for t in 0..T (scalar or array); abar_0 == 1."""
        t = self._check_t(t, lo=0)
        return self._abar_ext[t]

    def fingerprint(self) -> str:
        """Short content hash identifying the schedule."""
        h = hashlib.sha256()
        h.update(f"schedule:{self.T}:".encode())
        h.update(self.betas.astype("<f8").tobytes())
        return h.hexdigest()[:16]


def build_linear(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Schedule with betas linearly interpolated from beta_start to beta_end inclusive."""
    if T < 1:
        raise ConfigurationError(f"T must be >= 1, got {T}")
    if not (0.0 < beta_start < 1.0):
        raise ConfigurationError(f"beta_start must lie in (0, 1), got {beta_start}")
    if not (beta_start <= beta_end < 1.0):
        raise ConfigurationError(f"beta_end must lie in [beta_start, 1), got {beta_end}")
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha_bars = np.cumprod(1.0 - betas)
    return NoiseSchedule(T=T, betas=betas, alpha_bars=alpha_bars)


def snr(s: NoiseSchedule, t):
    """Signal-to-noise ratio abar_t / (1 - abar_t); strictly decreasing in t."""
    abar = s.alpha_bar(s._check_t(t))
    return abar / (1.0 - abar)


def amplification_coeff(s: NoiseSchedule, t):
    """1 / sqrt(SNR(t)): the factor multiplying noise-prediction error in x0 space."""
    abar = s.alpha_bar(s._check_t(t))
    return np.sqrt((1.0 - abar) / abar)


def vlb_weight(s: NoiseSchedule, t):
    """Per-step coefficient of the eps-space squared error in the variational bound."""
    beta = s.beta(t)
    abar = s.alpha_bar(t)
    return beta**2 / ((1.0 - beta) * (1.0 - abar))


@dataclass(frozen=True)
class PosteriorCoeffs:
    """Coefficients of the forward-process posterior q(x_{t-1} | x_t, x_0).

    mean = c1 * x_0 + c2 * x_t, variance = tilde_beta. At t = 1 the posterior
    collapses onto x_0 (c1 = 1, c2 = 0, tilde_beta = 0).
    """

    c1: float
    c2: float
    tilde_beta: float


def _posterior_from(beta, abar_prev, abar) -> PosteriorCoeffs:
    denom = 1.0 - abar
    c1 = np.sqrt(abar_prev) * beta / denom
    c2 = np.sqrt(1.0 - beta) * (1.0 - abar_prev) / denom
    tilde_beta = (1.0 - abar_prev) / denom * beta
    return PosteriorCoeffs(c1=float(c1), c2=float(c2), tilde_beta=float(tilde_beta))


def posterior_coeffs(s: NoiseSchedule, t: int) -> PosteriorCoeffs:
    """Posterior coefficients at step t (1..T), with abar_0 = 1."""
    t = int(s._check_t(t))
    return _posterior_from(s.beta(t), s.alpha_bar(t - 1), s.alpha_bar(t))


@dataclass(frozen=True)
class RespacedSchedule:
    """Sub-schedule over S of the base schedule's T steps.

    selected_timesteps is strictly increasing and ends at T. effective_betas
    are recomputed so that the running product of (1 - effective_beta) at
    position k matches base.alpha_bars at selected_timesteps[k].

    Respaced positions k are 1-based (k = 1..S); position 0 denotes clean data.
    """

    base: NoiseSchedule
    selected_timesteps: np.ndarray
    effective_betas: np.ndarray

    @property
    def S(self) -> int:
        return len(self.selected_timesteps)

    def _check_k(self, k: int) -> int:
        k = int(k)
        if not 1 <= k <= self.S:
            raise IndexError(f"respaced position out of range [1, {self.S}]: got {k}")
        return k

    def timestep(self, k: int) -> int:
        """Base timestep at respaced position k (1..S)."""
        return int(self.selected_timesteps[self._check_k(k) - 1])

    def alpha_bar(self, k: int) -> float:
        """abar at respaced position k (0..S); position 0 is 1."""
        if k == 0:
            return 1.0
        return float(self.base.alpha_bar(self.timestep(k)))

    def posterior_coeffs(self, k: int) -> PosteriorCoeffs:
        """Posterior coefficients for the respaced transition k -> k-1."""
        k = self._check_k(k)
        return _posterior_from(self.effective_betas[k - 1], self.alpha_bar(k - 1), self.alpha_bar(k))


def respace(s: NoiseSchedule, S: int) -> RespacedSchedule:
    """Select S evenly spaced timesteps (always including T) and rebuild betas.

    S = T reproduces the base schedule exactly; S = 1 keeps only step T.
    """
    if not 1 <= S <= s.T:
        raise ConfigurationError(f"respacing steps must lie in [1, T={s.T}], got {S}")
    if S == s.T:
        selected = np.arange(1, s.T + 1, dtype=np.int64)
        return RespacedSchedule(base=s, selected_timesteps=selected, effective_betas=s.betas.copy())
    if S == 1:
        selected = np.array([s.T], dtype=np.int64)
    else:
        selected = np.round(np.linspace(1, s.T, S)).astype(np.int64)
    abars = s.alpha_bar(selected)
    prev = np.concatenate([[1.0], abars[:-1]])
    effective = 1.0 - abars / prev
    return RespacedSchedule(base=s, selected_timesteps=selected, effective_betas=effective)
