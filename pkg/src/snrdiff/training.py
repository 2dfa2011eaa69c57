"""Forward diffusion, prediction targets, the weighted denoising loss, and the training loop.

The three prediction targets (eps, x0, v) are linear in (x0, eps) given t, so
conversions between them are exact; round-trip identities are tested to 1e-12.
The loss applies w(t) to the squared error in the network's own target space;
``weight_eps_space`` instead weights the equivalent eps-space error by folding
in the exact conversion factor (SNR(t) for x0 targets, abar_t for v targets).
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .data_metrics import ToyDataset, generate
from .errors import ConfigurationError, DivergenceError, ShapeError
from .schedule import NoiseSchedule, build_linear, snr
from .weighting import WeightStrategy, weight


class PredictionTarget(enum.Enum):
    EPSILON = "epsilon"
    X0 = "x0"
    V = "v"


def parse_target(name: str) -> PredictionTarget:
    try:
        return PredictionTarget(name.strip().lower())
    except ValueError:
        valid = ", ".join(k.value for k in PredictionTarget)
        raise ConfigurationError(f"unknown prediction target {name!r}; expected one of: {valid}") from None


def _batch_t(t, n: int) -> np.ndarray:
    if np.isscalar(t) or np.asarray(t).ndim == 0:
        return np.full(n, int(t), dtype=np.int64)
    t = np.asarray(t)
    if t.shape != (n,):
        raise ShapeError(f"t must be scalar or shape ({n},), got {t.shape}")
    return t


def q_sample(s: NoiseSchedule, x0: np.ndarray, t, eps: np.ndarray) -> np.ndarray:
    """Forward-diffused batch x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ShapeError(f"x0 shape {x0.shape} must match eps shape {eps.shape}")
    abar = s.alpha_bar(_batch_t(t, x0.shape[0]))
    return np.sqrt(abar)[:, None] * x0 + np.sqrt(1.0 - abar)[:, None] * eps


def make_target(target: PredictionTarget, s: NoiseSchedule, t, x0: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Training target in the chosen parameterisation."""
    if target is PredictionTarget.EPSILON:
        return np.asarray(eps, dtype=np.float64)
    if target is PredictionTarget.X0:
        return np.asarray(x0, dtype=np.float64)
    abar = s.alpha_bar(_batch_t(t, np.asarray(x0).shape[0]))
    return np.sqrt(abar)[:, None] * eps - np.sqrt(1.0 - abar)[:, None] * x0


def to_eps_hat(target: PredictionTarget, s: NoiseSchedule, t, x_t: np.ndarray, net_out: np.ndarray) -> np.ndarray:
    """Convert a network output in any target space to a noise prediction."""
    if target is PredictionTarget.EPSILON:
        return np.asarray(net_out, dtype=np.float64)
    abar = s.alpha_bar(_batch_t(t, np.asarray(x_t).shape[0]))
    if target is PredictionTarget.X0:
        if np.any(abar >= 1.0):
            raise DivergenceError("cannot invert an x0 prediction at abar_t = 1 (zero noise scale)")
        return (x_t - np.sqrt(abar)[:, None] * net_out) / np.sqrt(1.0 - abar)[:, None]
    return np.sqrt(1.0 - abar)[:, None] * x_t + np.sqrt(abar)[:, None] * net_out


def eps_space_factor(target: PredictionTarget, s: NoiseSchedule, t) -> np.ndarray:
    """Multiplier turning a target-space squared error into the eps-space one."""
    t = np.asarray(t)
    if target is PredictionTarget.EPSILON:
        return np.ones(t.shape, dtype=np.float64)
    if target is PredictionTarget.X0:
        return snr(s, t)
    return s.alpha_bar(t)


def weighted_loss(
    w: np.ndarray,
    target: PredictionTarget,
    s: NoiseSchedule,
    m: nn.Denoiser,
    x0: np.ndarray,
    t: np.ndarray,
    eps: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Batch-mean weighted squared error and its gradient w.r.t. the network output.

    Leaves the forward tape on the model so backward() can follow directly.
    """
    x_t = q_sample(s, x0, t, eps)
    tgt = make_target(target, s, t, x0, eps)
    out = nn.forward(m, x_t, t, s)
    diff = out - tgt
    per_example = np.einsum("ij,ij->i", diff, diff)
    value = float(np.mean(w * per_example))
    upstream = (2.0 / len(diff)) * w[:, None] * diff
    return value, upstream


def loss(
    strategy: WeightStrategy,
    target: PredictionTarget,
    s: NoiseSchedule,
    m: nn.Denoiser,
    x0: np.ndarray,
    t,
    eps: np.ndarray,
    weight_eps_space: bool = False,
) -> float:
    """Mean over the batch of w(t) * ||target - prediction||^2."""
    t = _batch_t(t, np.asarray(x0).shape[0])
    w = weight(strategy, s, t)
    if weight_eps_space:
        w = w * eps_space_factor(target, s, t)
    value, _ = weighted_loss(w, target, s, m, x0, t, eps)
    m._tape = None
    return value


@dataclass
class RunLog:
    """Periodic training measurements; wall_ms is kept out of the main CSV."""

    steps: list[int] = field(default_factory=list)
    wall_ms: list[float] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    ema_losses: list[float] = field(default_factory=list)

    def append(self, step: int, wall: float, value: float, ema_value: float):
        self.steps.append(step)
        self.wall_ms.append(wall)
        self.losses.append(value)
        self.ema_losses.append(ema_value)

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write("step,loss,ema_loss\n")
            for s_, l_, e_ in zip(self.steps, self.losses, self.ema_losses):
                f.write(f"{s_},{l_!r},{e_!r}\n")

    def timing_lines(self) -> list[str]:
        return [f"step {s_} wall_ms {w_:.3f}" for s_, w_ in zip(self.steps, self.wall_ms)]


@dataclass
class TrainConfig:
    """Everything a run needs; the seed drives init, timestep, and noise draws."""

    schedule_T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    strategy: WeightStrategy = None
    target: PredictionTarget = PredictionTarget.EPSILON
    dataset: ToyDataset = None
    batch_size: int = 256
    total_steps: int = 20000
    lr: float = 2e-4
    ema_decay: float = 0.9999
    seed: int = 0
    log_every: int = 100
    weight_eps_space: bool = False
    hidden_dims: tuple[int, ...] = (128, 128, 128, 128)
    time_embed_dim: int = 64
    input_dim: int = 2

    def __post_init__(self):
        if self.strategy is None or self.dataset is None:
            raise ConfigurationError("TrainConfig requires a weight strategy and a dataset")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.total_steps < 0:
            raise ConfigurationError(f"total_steps must be >= 0, got {self.total_steps}")

    def build_schedule(self) -> NoiseSchedule:
        return build_linear(self.schedule_T, self.beta_start, self.beta_end)


def train(
    cfg: TrainConfig,
    divergence_checkpoint: str | None = None,
) -> tuple[nn.Denoiser, nn.EmaState, RunLog]:
    """Run the optimization loop: sample batch, uniform t, fresh eps, step, EMA.

    On a non-finite loss or gradient the last finite state is checkpointed (if a
    path was given) and DivergenceError is raised with the step index.
    """
    s = cfg.build_schedule()
    init_seed, loop_seed = [g.generate_state(1)[0] for g in np.random.SeedSequence(cfg.seed).spawn(2)]
    model = nn.init_denoiser(cfg.input_dim, cfg.hidden_dims, cfg.time_embed_dim, seed=init_seed)
    adam = nn.init_adam(model.param_count)
    ema = nn.init_ema(model, cfg.ema_decay)
    rng = np.random.default_rng(loop_seed)
    log = RunLog()
    ema_loss = None
    start = time.perf_counter()

    for step in range(1, cfg.total_steps + 1):
        x0 = generate(cfg.dataset, cfg.batch_size, start=(step - 1) * cfg.batch_size)
        t = rng.integers(1, s.T + 1, size=cfg.batch_size)
        eps = rng.standard_normal((cfg.batch_size, cfg.input_dim))
        w = weight(cfg.strategy, s, t)
        if cfg.weight_eps_space:
            w = w * eps_space_factor(cfg.target, s, t)
        value, upstream = weighted_loss(w, cfg.target, s, model, x0, t, eps)
        try:
            if not np.isfinite(value):
                raise DivergenceError(f"non-finite loss at training step {step}")
            grads = nn.backward(model, upstream)
            nn.adam_step(model, grads, adam, cfg.lr)
        except DivergenceError:
            if divergence_checkpoint is not None:
                from .checkpoint import save_checkpoint

                save_checkpoint(model, ema, divergence_checkpoint, cfg=cfg, schedule=s)
            raise
        nn.ema_update(ema, model.params)
        ema_loss = value if ema_loss is None else 0.99 * ema_loss + 0.01 * value
        if step % cfg.log_every == 0 or step == cfg.total_steps:
            log.append(step, (time.perf_counter() - start) * 1e3, value, ema_loss)
    return model, ema, log
