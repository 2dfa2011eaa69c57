"""Feed-forward denoiser eps_theta(x_t, t) with explicit reverse-mode gradients.

The network is an MLP over [x, sinusoidal_time_embedding(t)] with SiLU hidden
activations. Parameters live in one flat float64 vector laid out by a manifest
of (name, shape, offset) entries; weight matrices are views into that vector,
so Adam and EMA updates are single vectorised array operations.

forward() records the per-layer inputs and pre-activations; backward() replays
them in reverse to accumulate parameter gradients. Everything is float64 and
free of hidden randomness, so fixed seeds give bit-identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DivergenceError, ShapeError, StateError
from .schedule import NoiseSchedule

ACTIVATION = "asilu"


def _asigmoid_parts(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Algebraic sigmoid s(z) = (1 + z / sqrt(1 + z^2)) / 2 and the sqrt term."""
    r = np.sqrt(1.0 + z * z)
    s = 0.5 + 0.5 * z / r
    return s, r


def act(z: np.ndarray) -> np.ndarray:
    """Activation a(z) = z * s(z): SiLU-shaped, C-infinity, transcendental-free.

    The algebraic sigmoid keeps the hot loops on SIMD sqrt/divide instead of
    exp, which is several times faster under float64 on this class of CPU.
    """
    s, _ = _asigmoid_parts(z)
    return z * s


def act_deriv(z: np.ndarray) -> np.ndarray:
    """a'(z) = s(z) + z * s'(z) with s'(z) = 1 / (2 (1 + z^2)^{3/2})."""
    s, r = _asigmoid_parts(z)
    return _act_deriv_from(z, r, s)


def _act_deriv_from(z: np.ndarray, r: np.ndarray, s: np.ndarray) -> np.ndarray:
    d = r * r
    d *= r
    np.divide(z, d, out=d)
    d *= 0.5
    d += s
    return d


def time_embedding(t, dim: int) -> np.ndarray:
    """Sinusoidal embedding of integer timesteps, shape (len(t), dim)."""
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half, dtype=np.float64) / half)
    args = t[:, None] * freqs[None, :]
    emb = np.empty((len(t), dim), dtype=np.float64)
    np.sin(args, out=emb[:, :half])
    np.cos(args, out=emb[:, half : 2 * half])
    if dim % 2:
        emb[:, -1] = 0.0
    return emb


_EMBED_TABLE_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _embedding_rows(t: np.ndarray, dim: int, max_t: int) -> np.ndarray:
    """Table-backed embedding lookup for integer t in 0..max_t."""
    table = _EMBED_TABLE_CACHE.get((dim, max_t))
    if table is None:
        table = time_embedding(np.arange(max_t + 1), dim)
        _EMBED_TABLE_CACHE[(dim, max_t)] = table
    return table[t]


def layer_sizes(input_dim: int, hidden_dims: tuple[int, ...], time_embed_dim: int) -> list[tuple[int, int]]:
    """(fan_in, fan_out) of every linear layer, last one mapping back to input_dim."""
    dims = [input_dim + time_embed_dim, *hidden_dims, input_dim]
    return list(zip(dims[:-1], dims[1:]))


def build_layout(input_dim: int, hidden_dims: tuple[int, ...], time_embed_dim: int):
    """Flat-vector layout manifest: list of (name, shape, offset)."""
    layout = []
    offset = 0
    for i, (fan_in, fan_out) in enumerate(layer_sizes(input_dim, hidden_dims, time_embed_dim)):
        layout.append((f"w{i}", (fan_in, fan_out), offset))
        offset += fan_in * fan_out
        layout.append((f"b{i}", (fan_out,), offset))
        offset += fan_out
    return layout, offset


@dataclass
class Denoiser:
    """MLP denoiser; params is the single source of truth for all weights."""

    input_dim: int
    hidden_dims: tuple[int, ...]
    time_embed_dim: int
    params: np.ndarray
    activation: str = ACTIVATION
    _tape: list | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.input_dim < 1:
            raise ConfigurationError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.time_embed_dim < 1:
            raise ConfigurationError(f"time_embed_dim must be >= 1, got {self.time_embed_dim}")
        if self.activation != ACTIVATION:
            raise ConfigurationError(f"unsupported activation {self.activation!r}")
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        layout, count = build_layout(self.input_dim, self.hidden_dims, self.time_embed_dim)
        if self.params.shape != (count,):
            raise ShapeError(f"params must have shape ({count},), got {self.params.shape}")
        self.params = np.ascontiguousarray(self.params, dtype=np.float64)
        self.layout = layout
        self.param_count = count
        self._views_cache = None

    def views(self, base: np.ndarray | None = None) -> dict[str, np.ndarray]:
        """Named views into a flat vector (params by default); no copies."""
        if base is None:
            # params is only ever mutated in place, so the view dict stays valid
            if self._views_cache is None:
                self._views_cache = self._build_views(self.params)
            return self._views_cache
        return self._build_views(base)

    def _build_views(self, base: np.ndarray) -> dict[str, np.ndarray]:
        return {
            name: base[offset : offset + int(np.prod(shape))].reshape(shape)
            for name, shape, offset in self.layout
        }

    @property
    def n_layers(self) -> int:
        return len(self.hidden_dims) + 1


def init_denoiser(
    input_dim: int,
    hidden_dims: tuple[int, ...] = (128, 128, 128, 128),
    time_embed_dim: int = 64,
    seed: int = 0,
) -> Denoiser:
    """He-initialised hidden layers, small-scale output layer, zero biases."""
    rng = np.random.default_rng(seed)
    layout, count = build_layout(input_dim, tuple(hidden_dims), time_embed_dim)
    params = np.zeros(count, dtype=np.float64)
    model = Denoiser(input_dim, tuple(hidden_dims), time_embed_dim, params)
    views = model.views()
    n_layers = model.n_layers
    for i in range(n_layers):
        w = views[f"w{i}"]
        fan_in = w.shape[0]
        scale = math.sqrt(2.0 / fan_in) if i < n_layers - 1 else 0.1 * math.sqrt(1.0 / fan_in)
        w[...] = rng.normal(0.0, scale, size=w.shape)
    return model


def forward(m: Denoiser, x: np.ndarray, t, s: NoiseSchedule, record: bool = True) -> np.ndarray:
    """Network output for a batch; records the computation for backward()."""
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t)
    if x.ndim != 2 or x.shape[1] != m.input_dim:
        raise ShapeError(f"x must have shape (n, {m.input_dim}), got {x.shape}")
    if t.shape != (x.shape[0],):
        raise ShapeError(f"t must have shape ({x.shape[0]},) to match x {x.shape}, got {t.shape}")
    s._check_t(t)
    views = m.views()
    h = np.empty((x.shape[0], m.input_dim + m.time_embed_dim), dtype=np.float64)
    h[:, : m.input_dim] = x
    h[:, m.input_dim :] = _embedding_rows(t, m.time_embed_dim, s.T)
    tape = []
    for i in range(m.n_layers - 1):
        z = h @ views[f"w{i}"] + views[f"b{i}"]
        act_s, act_r = _asigmoid_parts(z)
        tape.append((h, z, act_r, act_s))
        h = z * act_s
    out = h @ views[f"w{m.n_layers - 1}"] + views[f"b{m.n_layers - 1}"]
    tape.append((h, None, None, None))
    m._tape = tape if record else None
    return out


def backward(m: Denoiser, loss_grad: np.ndarray) -> np.ndarray:
    """Gradient of the scalar loss w.r.t. every parameter, flat and param-aligned.

    Consumes the tape recorded by the latest forward().
    """
    if m._tape is None:
        raise StateError("backward() requires a recorded forward() pass")
    tape, m._tape = m._tape, None
    loss_grad = np.asarray(loss_grad, dtype=np.float64)
    n = tape[0][0].shape[0]
    if loss_grad.shape != (n, m.input_dim):
        raise ShapeError(f"loss_grad must have shape ({n}, {m.input_dim}), got {loss_grad.shape}")
    views = m.views()
    grads = np.empty_like(m.params)
    gviews = m.views(grads)
    delta = loss_grad
    for i in range(m.n_layers - 1, -1, -1):
        h_in, z, sig = tape[i]
        if z is not None:
            delta = delta * _dsilu_from(z, sig)
        np.matmul(h_in.T, delta, out=gviews[f"w{i}"])
        delta.sum(axis=0, out=gviews[f"b{i}"])
        if i > 0:
            delta = delta @ views[f"w{i}"].T
    return grads


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    m1: np.ndarray
    m2: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(param_count: int) -> AdamState:
    return AdamState(m1=np.zeros(param_count), m2=np.zeros(param_count))


def adam_step(m: Denoiser, g: np.ndarray, state: AdamState, lr: float) -> np.ndarray:
    """Bias-corrected Adam update; mutates params and moments in place."""
    if g.shape != m.params.shape or state.m1.shape != m.params.shape:
        raise ShapeError(
            f"gradient/moment shapes {g.shape}/{state.m1.shape} must match params {m.params.shape}"
        )
    if not np.isfinite(g).all():
        raise DivergenceError(f"non-finite gradient at optimizer step {state.step + 1}")
    state.step += 1
    state.m1 *= state.beta1
    state.m1 += (1.0 - state.beta1) * g
    state.m2 *= state.beta2
    state.m2 += (1.0 - state.beta2) * np.square(g)
    denom = np.sqrt(state.m2 / (1.0 - state.beta2**state.step))
    denom += state.eps
    np.divide(state.m1, denom, out=denom)
    denom *= lr / (1.0 - state.beta1**state.step)
    m.params -= denom
    return m.params


@dataclass
class EmaState:
    """Exponential moving average of the parameter vector."""

    decay: float
    shadow: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.decay <= 1.0:
            raise ConfigurationError(f"ema decay must lie in [0, 1], got {self.decay}")
        self.shadow = np.ascontiguousarray(self.shadow, dtype=np.float64)


def init_ema(m: Denoiser, decay: float) -> EmaState:
    return EmaState(decay=decay, shadow=m.params.copy())


def ema_update(e: EmaState, params: np.ndarray) -> np.ndarray:
    """shadow <- decay * shadow + (1 - decay) * params, in place."""
    if params.shape != e.shadow.shape:
        raise ShapeError(f"params shape {params.shape} must match shadow {e.shadow.shape}")
    e.shadow *= e.decay
    e.shadow += (1.0 - e.decay) * params
    return e.shadow


def with_params(m: Denoiser, params: np.ndarray) -> Denoiser:
    """Same architecture over a different flat vector (e.g. the EMA shadow)."""
    return Denoiser(m.input_dim, m.hidden_dims, m.time_embed_dim, params.copy())
