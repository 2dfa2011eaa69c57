"""DDPM ancestral and deterministic DDIM sampling over respaced schedules.

Noise for sample i at respaced position k is a pure function of
(seed, k, i), so generation is reproducible bit for bit regardless of how the
sample batch is chunked across workers. The DDPM variance follows the
sigma^2 = beta convention; the smaller posterior variance is available behind
``sigma_small``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import nn
from .errors import ConfigurationError, DivergenceError
from .rng import normal_matrix
from .schedule import NoiseSchedule, RespacedSchedule, respace
from .training import PredictionTarget, to_eps_hat


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler choice plus the knobs shared by both steppers."""

    kind: str = "ddpm"
    steps: int = 1000
    seed: int = 0
    clip_x0: bool = False
    clip_lo: float = -1.0
    clip_hi: float = 1.0
    use_ema: bool = True
    sigma_small: bool = False

    def __post_init__(self):
        if self.kind not in ("ddpm", "ddim"):
            raise ConfigurationError(f"sampler kind must be 'ddpm' or 'ddim', got {self.kind!r}")
        if self.steps < 1:
            raise ConfigurationError(f"sampler steps must be >= 1, got {self.steps}")
        if self.clip_x0 and not self.clip_lo < self.clip_hi:
            raise ConfigurationError(f"clip bounds must satisfy lo < hi, got [{self.clip_lo}, {self.clip_hi}]")


EpsFn = Callable[[np.ndarray, int], np.ndarray]


def model_eps_fn(m: nn.Denoiser, s: NoiseSchedule, target: PredictionTarget = PredictionTarget.EPSILON) -> EpsFn:
    """Noise-prediction adapter over a trained network (any prediction target)."""

    def eps_fn(x: np.ndarray, t: int) -> np.ndarray:
        tb = np.full(len(x), int(t))
        return to_eps_hat(target, s, tb, x, nn.forward(m, x, tb, s, record=False))

    return eps_fn


def _x0_from_eps(rs: RespacedSchedule, k: int, x_t: np.ndarray, eps_hat: np.ndarray, clip) -> np.ndarray:
    abar = rs.alpha_bar(k)
    x0_hat = (x_t - np.sqrt(1.0 - abar) * eps_hat) / np.sqrt(abar)
    if clip is not None:
        x0_hat = np.clip(x0_hat, clip[0], clip[1])
    return x0_hat


def ddpm_step(
    rs: RespacedSchedule,
    k: int,
    x_t: np.ndarray,
    eps_hat: np.ndarray,
    noise: np.ndarray | None,
    clip: tuple[float, float] | None = None,
    sigma_small: bool = False,
) -> np.ndarray:
    """One ancestral step k -> k-1; noise is forced to zero on the final transition."""
    x0_hat = _x0_from_eps(rs, k, x_t, eps_hat, clip)
    pc = rs.posterior_coeffs(k)
    x_prev = pc.c1 * x0_hat + pc.c2 * x_t
    if k > 1 and noise is not None:
        var = pc.tilde_beta if sigma_small else float(rs.effective_betas[k - 1])
        x_prev = x_prev + np.sqrt(var) * noise
    if not np.isfinite(x_prev).all():
        raise DivergenceError(f"non-finite sample state after ddpm step k={k} (t={rs.timestep(k)})")
    return x_prev


def ddim_step(
    rs: RespacedSchedule,
    k: int,
    x_t: np.ndarray,
    eps_hat: np.ndarray,
    clip: tuple[float, float] | None = None,
) -> np.ndarray:
    """One deterministic step k -> k-1 (eta = 0)."""
    x0_hat = _x0_from_eps(rs, k, x_t, eps_hat, clip)
    abar_prev = rs.alpha_bar(k - 1)
    x_prev = np.sqrt(abar_prev) * x0_hat + np.sqrt(1.0 - abar_prev) * eps_hat
    if not np.isfinite(x_prev).all():
        raise DivergenceError(f"non-finite sample state after ddim step k={k} (t={rs.timestep(k)})")
    return x_prev


@dataclass
class SampleResult:
    """Final samples plus, when requested, the per-step (x_t, x0_hat) trail."""

    samples: np.ndarray
    trajectory: list[dict] | None = None


def sample(
    model_or_eps_fn,
    s: NoiseSchedule,
    cfg: SamplerConfig,
    n: int,
    dim: int = 2,
    record_trajectory: bool = False,
) -> SampleResult:
    """Draw n samples by iterating the chosen stepper over the respaced schedule."""
    if n < 0:
        raise ConfigurationError(f"sample count must be >= 0, got {n}")
    if isinstance(model_or_eps_fn, nn.Denoiser):
        eps_fn = model_eps_fn(model_or_eps_fn, s)
        dim = model_or_eps_fn.input_dim
    else:
        eps_fn = model_or_eps_fn
    rs = respace(s, cfg.steps)
    clip = (cfg.clip_lo, cfg.clip_hi) if cfg.clip_x0 else None
    ids = np.arange(n)
    x = normal_matrix(cfg.seed, rs.S + 1, ids, dim)
    trajectory = [] if record_trajectory else None
    for k in range(rs.S, 0, -1):
        t = rs.timestep(k)
        eps_hat = eps_fn(x, t)
        if record_trajectory:
            trajectory.append(
                {"step_index": k, "t": t, "x": x.copy(), "x0_hat": _x0_from_eps(rs, k, x, eps_hat, clip)}
            )
        if cfg.kind == "ddpm":
            noise = normal_matrix(cfg.seed, k, ids, dim) if k > 1 else None
            x = ddpm_step(rs, k, x, eps_hat, noise, clip=clip, sigma_small=cfg.sigma_small)
        else:
            x = ddim_step(rs, k, x, eps_hat, clip=clip)
    return SampleResult(samples=x, trajectory=trajectory)
