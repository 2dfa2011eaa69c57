"""Bias diagnostics: x0 estimation, the exact error decomposition, and MSE sweeps.

The central identity is algebraic, not a model property: for any noise
prediction eps_hat (however wrong),

    x0 = x0_hat + (1 / sqrt(SNR(t))) * (eps_hat - eps)

where x0_hat inverts the forward map using eps_hat. The second term is the
amplified error; its coefficient grows with t, which is what turns small
late-step prediction errors into large x0-space bias.

The analytic Gaussian denoiser is the Bayes-optimal noise predictor for
x0 ~ N(mu, sigma2 I); it lets sampler tests run against a known-exact model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .data_metrics import ToyDataset, generate
from .errors import ConfigurationError, DivergenceError
from .rng import normal_matrix
from .schedule import NoiseSchedule, amplification_coeff
from .training import PredictionTarget, q_sample, to_eps_hat


def estimate_x0(s: NoiseSchedule, t, x_t: np.ndarray, eps_hat: np.ndarray) -> np.ndarray:
    """Invert the forward map around a noise prediction: x_t -> x0_hat."""
    t = np.asarray(t)
    abar = s.alpha_bar(t)
    if np.any(abar < 1e-300):
        raise DivergenceError(f"alpha_bar underflow at t={t}: cannot divide by sqrt({abar})")
    root = np.sqrt(abar)
    coeff = np.sqrt(1.0 - abar) / root
    if np.ndim(x_t) == 2 and np.ndim(abar) == 1:
        root = root[:, None]
        coeff = coeff[:, None]
    return x_t / root - coeff * np.asarray(eps_hat, dtype=np.float64)


@dataclass(frozen=True)
class BiasDecomposition:
    """The (x0_hat, amplified_error) split of x0 at one timestep."""

    x0_hat: np.ndarray
    amplified_error: np.ndarray
    t: int
    amp_coeff: float


def decompose(s: NoiseSchedule, t: int, x0: np.ndarray, eps: np.ndarray, eps_hat: np.ndarray) -> BiasDecomposition:
    """Form x_t internally, estimate x0 from eps_hat, and split off the amplified error."""
    t = int(t)
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    squeeze = x0.ndim == 1
    if squeeze:
        x0, eps, eps_hat = x0[None, :], eps[None, :], eps_hat[None, :]
    x_t = q_sample(s, x0, t, eps)
    x0_hat = estimate_x0(s, np.full(len(x0), t), x_t, eps_hat)
    amp = float(amplification_coeff(s, t))
    amplified = amp * (eps_hat - eps)
    if squeeze:
        x0_hat, amplified = x0_hat[0], amplified[0]
    return BiasDecomposition(x0_hat=x0_hat, amplified_error=amplified, t=t, amp_coeff=amp)


def analytic_gaussian_denoiser(mu: np.ndarray, sigma2: float, s: NoiseSchedule, t, x_t: np.ndarray) -> np.ndarray:
    """Bayes-optimal eps prediction E[eps | x_t] for x0 ~ N(mu, sigma2 I)."""
    if sigma2 <= 0:
        raise ConfigurationError(f"sigma2 must be positive, got {sigma2}")
    mu = np.asarray(mu, dtype=np.float64)
    abar = s.alpha_bar(np.asarray(t))
    if np.ndim(x_t) == 2 and np.ndim(abar) == 1:
        abar = abar[:, None]
    return np.sqrt(1.0 - abar) * (x_t - np.sqrt(abar) * mu) / (abar * sigma2 + 1.0 - abar)


def one_step_sweep(
    m: nn.Denoiser,
    dataset: ToyDataset,
    t_list,
    s: NoiseSchedule,
    target: PredictionTarget = PredictionTarget.EPSILON,
    n_eval: int = 4096,
    eval_seed: int = 0,
) -> np.ndarray:
    """Diffuse, denoise once, decompose; rows of (t, mean ||x0_hat - x0||^2, mean ||amplified_error||^2).

    The two deviation columns agree by the decomposition identity; emitting
    both keeps an audit trail in every sweep output.
    """
    if n_eval < 1:
        raise ConfigurationError(f"one_step_sweep needs a non-empty evaluation set, got n_eval={n_eval}")
    t_list = np.asarray(t_list, dtype=np.int64)
    if t_list.size == 0:
        raise ConfigurationError("one_step_sweep needs at least one timestep")
    x0 = generate(dataset, n_eval)
    idx = np.arange(n_eval)
    rows = np.empty((len(t_list), 3), dtype=np.float64)
    for j, t in enumerate(t_list):
        eps = normal_matrix(eval_seed, int(t), idx, x0.shape[1])
        tb = np.full(n_eval, int(t))
        x_t = q_sample(s, x0, tb, eps)
        eps_hat = to_eps_hat(target, s, tb, x_t, nn.forward(m, x_t, tb, s, record=False))
        x0_hat = estimate_x0(s, tb, x_t, eps_hat)
        amp_err = amplification_coeff(s, int(t)) * (eps_hat - eps)
        rows[j] = (
            t,
            float(np.mean(np.sum((x0_hat - x0) ** 2, axis=1))),
            float(np.mean(np.sum(amp_err**2, axis=1))),
        )
    return rows


@dataclass(frozen=True)
class MseCurve:
    """Per-timestep mean squared eps-space error for one mode."""

    mode: str
    t_grid: np.ndarray
    values: np.ndarray


INITIAL_MODE = "initial"


def mse_curve(
    mode: str,
    m: nn.Denoiser | None,
    dataset: ToyDataset,
    s: NoiseSchedule,
    t_grid,
    target: PredictionTarget = PredictionTarget.EPSILON,
    n_eval: int = 4096,
    eval_seed: int = 0,
) -> MseCurve:
    """Mean ||prediction - eps||^2 per probed timestep.

    ``initial`` mode scores the network input x_t itself against eps; model
    modes score the network's noise prediction. Evaluation noise is keyed by
    (eval_seed, t) only, so curves for different modes share draws exactly.
    """
    if mode != INITIAL_MODE and m is None:
        raise ConfigurationError(f"mse_curve mode {mode!r} requires a model")
    if n_eval < 1:
        raise ConfigurationError(f"mse_curve needs a non-empty evaluation set, got n_eval={n_eval}")
    t_grid = np.asarray(t_grid, dtype=np.int64)
    if t_grid.size == 0:
        raise ConfigurationError("mse_curve needs at least one timestep")
    x0 = generate(dataset, n_eval)
    idx = np.arange(n_eval)
    values = np.empty(len(t_grid), dtype=np.float64)
    for j, t in enumerate(t_grid):
        eps = normal_matrix(eval_seed, int(t), idx, x0.shape[1])
        tb = np.full(n_eval, int(t))
        x_t = q_sample(s, x0, tb, eps)
        if mode == INITIAL_MODE:
            pred = x_t
        else:
            pred = to_eps_hat(target, s, tb, x_t, nn.forward(m, x_t, tb, s, record=False))
        values[j] = float(np.mean(np.sum((pred - eps) ** 2, axis=1)))
    return MseCurve(mode=mode, t_grid=t_grid, values=values)
