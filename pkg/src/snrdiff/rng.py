"""Counter-based random streams.

Datasets and samplers draw their randomness as a pure function of
(seed, stream coordinates) instead of from a stateful generator. Values for
index i never depend on how many values were drawn before it, so chunked or
fanned-out computation reproduces the single-pass result bit for bit.

The mixer is SplitMix64, evaluated vectorised on uint64 arrays.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
# 2^-53: top 53 bits of a uint64 map to a double in [0, 1)
_INV_2_53 = float(2.0**-53)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = (x + _GOLDEN).astype(np.uint64)
    x ^= x >> np.uint64(30)
    x *= _MIX1
    x ^= x >> np.uint64(27)
    x *= _MIX2
    x ^= x >> np.uint64(31)
    return x


def _key(seed: int, stream: int) -> np.ndarray:
    base = np.asarray(seed & 0xFFFFFFFFFFFFFFFF, dtype=np.uint64)
    offset = np.asarray(stream & 0xFFFFFFFFFFFFFFFF, dtype=np.uint64) * _GOLDEN
    return _splitmix64(base + offset)


# uint64 wraparound is the whole point of the mixer; silence overflow warnings
@np.errstate(over="ignore")
def uniforms(seed: int, stream: int, index: np.ndarray, column: int) -> np.ndarray:
    """Uniform [0,1) doubles keyed by (seed, stream, index, column).

    ``index`` is an integer array; the result has its shape. Distinct
    (seed, stream, index, column) tuples give independent values.
    """
    idx = np.asarray(index, dtype=np.uint64)
    word = _key(seed, stream) + _splitmix64(idx * np.uint64(0x100) + np.uint64(column))
    bits = _splitmix64(word) >> np.uint64(11)
    return bits.astype(np.float64) * _INV_2_53


def normals(seed: int, stream: int, index: np.ndarray, column: int) -> np.ndarray:
    """Standard normal doubles via Box-Muller on two uniform columns.

    Columns are consumed in pairs: column c uses uniform columns (2c, 2c+1).
    """
    u1 = uniforms(seed, stream, index, 2 * column)
    u2 = uniforms(seed, stream, index, 2 * column + 1)
    # 1-u1 keeps the log argument in (0, 1]
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def normal_matrix(seed: int, stream: int, index: np.ndarray, dim: int) -> np.ndarray:
    """(len(index), dim) matrix of standard normals, one column pair per dim."""
    idx = np.asarray(index)
    out = np.empty((idx.shape[0], dim), dtype=np.float64)
    for j in range(dim):
        out[:, j] = normals(seed, stream, idx, j)
    return out
