"""Seeded 2D toy datasets and point-cloud distribution metrics.

Dataset sampling is counter-based: sample i is a pure function of
(kind, params, seed, i), so any index range can be generated in any chunking
and still agree bit for bit. Every kind consumes a fixed set of uniform
columns per index (checkerboard picks its cell in closed form instead of
rejection sampling for exactly this reason).

The metrics stand in for image-domain quality scores: sliced Wasserstein and
energy distance measure distribution mismatch, mean_shift is the point-cloud
analogue of a spatial-mean (color) shift, cov_error catches scale/shape drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, MetricError
from .rng import normals, uniforms

_KINDS = ("gaussian_mixture", "swiss_roll", "checkerboard", "rings")


@dataclass(frozen=True)
class ToyDataset:
    """2D dataset spec; fields beyond ``kind`` and ``seed`` apply per kind."""

    kind: str
    seed: int = 0
    components: int = 8      # gaussian_mixture: number of modes on the circle
    radius: float = 10.0     # gaussian_mixture: circle radius
    sigma: float = 0.5       # gaussian_mixture: per-component std
    noise: float = 0.3       # swiss_roll: tangential jitter std
    extent: int = 2          # checkerboard: half-width in unit cells
    rings: int = 3           # rings: number of concentric circles

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown dataset kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind == "gaussian_mixture" and (self.components < 1 or self.radius < 0 or self.sigma <= 0):
            raise ConfigurationError(
                f"gaussian_mixture needs components >= 1, radius >= 0, sigma > 0; "
                f"got {self.components}, {self.radius}, {self.sigma}"
            )
        if self.kind == "swiss_roll" and self.noise < 0:
            raise ConfigurationError(f"swiss_roll noise must be >= 0, got {self.noise}")
        if self.kind == "checkerboard" and self.extent < 1:
            raise ConfigurationError(f"checkerboard extent must be >= 1, got {self.extent}")
        if self.kind == "rings" and self.rings < 1:
            raise ConfigurationError(f"rings count must be >= 1, got {self.rings}")


def generate(d: ToyDataset, n: int, start: int = 0) -> np.ndarray:
    """Samples for indices [start, start + n); shape (n, 2) float64."""
    if n < 0:
        raise ConfigurationError(f"sample count must be >= 0, got {n}")
    idx = np.arange(start, start + n, dtype=np.uint64)
    out = np.empty((n, 2), dtype=np.float64)
    if n == 0:
        return out
    u0 = uniforms(d.seed, 0, idx, 0)
    if d.kind == "gaussian_mixture":
        comp = np.floor(u0 * d.components).astype(np.int64)
        angles = 2.0 * np.pi * comp / d.components
        out[:, 0] = d.radius * np.cos(angles) + d.sigma * normals(d.seed, 1, idx, 0)
        out[:, 1] = d.radius * np.sin(angles) + d.sigma * normals(d.seed, 1, idx, 1)
    elif d.kind == "swiss_roll":
        angle = 1.5 * np.pi * (1.0 + 2.0 * u0)
        out[:, 0] = 0.4 * angle * np.cos(angle) + d.noise * normals(d.seed, 1, idx, 0)
        out[:, 1] = 0.4 * angle * np.sin(angle) + d.noise * normals(d.seed, 1, idx, 1)
    elif d.kind == "checkerboard":
        e = d.extent
        cell = np.floor(u0 * (2 * e * e)).astype(np.int64)
        row = cell // e - e
        col = cell % e
        first = -e + ((row + e) % 2)
        out[:, 0] = first + 2 * col + uniforms(d.seed, 0, idx, 1)
        out[:, 1] = row + uniforms(d.seed, 0, idx, 2)
    else:  # rings
        ring = np.floor(u0 * d.rings).astype(np.int64)
        theta = 2.0 * np.pi * uniforms(d.seed, 0, idx, 1)
        rad = (ring + 1.0) + 0.05 * normals(d.seed, 1, idx, 0)
        out[:, 0] = rad * np.cos(theta)
        out[:, 1] = rad * np.sin(theta)
    return out


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise MetricError(f"sample sets must be 2-D arrays, got shapes {a.shape} and {b.shape}")
    if len(a) == 0 or len(b) == 0:
        raise MetricError("metrics require non-empty sample sets")
    if a.shape[1] != b.shape[1]:
        raise MetricError(f"dimensionality mismatch: {a.shape[1]} vs {b.shape[1]}")
    return a, b


def _w1_sorted(pa: np.ndarray, pb: np.ndarray) -> float:
    """Exact 1-D Wasserstein-1 between empirical distributions."""
    if len(pa) == len(pb):
        return float(np.mean(np.abs(np.sort(pa) - np.sort(pb))))
    # unequal sizes: integrate |CDF_a - CDF_b| over the merged support
    values = np.concatenate([pa, pb])
    order = np.argsort(values, kind="mergesort")
    values = values[order]
    deltas = np.diff(values)
    steps = np.where(order < len(pa), 1.0 / len(pa), -1.0 / len(pb))
    cdf_gap = np.abs(np.cumsum(steps))[:-1]
    return float(np.sum(deltas * cdf_gap))


def sliced_wasserstein(a: np.ndarray, b: np.ndarray, n_projections: int = 128, seed: int = 0) -> float:
    """Mean 1-D W1 distance over seeded random unit projection directions."""
    a, b = _check_pair(a, b)
    if n_projections < 1:
        raise ConfigurationError(f"n_projections must be >= 1, got {n_projections}")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_projections, a.shape[1]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    total = 0.0
    for theta in dirs:
        total += _w1_sorted(a @ theta, b @ theta)
    return total / n_projections


def mean_shift(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between the sample means."""
    a, b = _check_pair(a, b)
    return float(np.linalg.norm(a.mean(axis=0) - b.mean(axis=0)))


def cov_error(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius distance between the sample covariance matrices."""
    a, b = _check_pair(a, b)
    if len(a) < 2 or len(b) < 2:
        raise MetricError("covariance comparison requires at least 2 samples per set")
    ca = np.cov(a, rowvar=False).reshape(a.shape[1], a.shape[1])
    cb = np.cov(b, rowvar=False).reshape(b.shape[1], b.shape[1])
    return float(np.linalg.norm(ca - cb, ord="fro"))


def _mean_pairwise_norm(a: np.ndarray, b: np.ndarray, block: int = 512) -> float:
    total = 0.0
    for i in range(0, len(a), block):
        chunk = a[i : i + block]
        diff = chunk[:, None, :] - b[None, :, :]
        total += float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)).sum())
    return total / (len(a) * len(b))


def energy_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Squared energy distance 2 E|a-b| - E|a-a'| - E|b-b'| (all-pairs terms)."""
    a, b = _check_pair(a, b)
    value = (
        2.0 * _mean_pairwise_norm(a, b)
        - _mean_pairwise_norm(a, a)
        - _mean_pairwise_norm(b, b)
    )
    return max(value, 0.0)


@dataclass(frozen=True)
class MetricReport:
    """Distribution-distance summary between a generated and a reference set."""

    sliced_wasserstein: float
    mean_shift: float
    cov_error: float
    energy_distance: float

    def as_dict(self) -> dict[str, float]:
        return {
            "sliced_wasserstein": self.sliced_wasserstein,
            "mean_shift": self.mean_shift,
            "cov_error": self.cov_error,
            "energy_distance": self.energy_distance,
        }


def metric_report(a: np.ndarray, b: np.ndarray, n_projections: int = 128, seed: int = 0) -> MetricReport:
    """All four metrics between sample sets a (generated) and b (reference)."""
    return MetricReport(
        sliced_wasserstein=sliced_wasserstein(a, b, n_projections=n_projections, seed=seed),
        mean_shift=mean_shift(a, b),
        cov_error=cov_error(a, b),
        energy_distance=energy_distance(a, b),
    )
