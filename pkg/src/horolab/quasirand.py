"""Seed-deterministic low-discrepancy streams.

All quasi-uniform sampling in the package is driven by Halton sequences
(radical-inverse digits in the first primes) with a seed-derived toroidal
shift.  The map from a 64-bit seed to the stream is a fixed function of
the seed, so identical (seed, index range) always produces identical
points and streams can be sharded by index range.  Halton's nonlinear
digit structure avoids the resonance a linear recurrence exhibits against
oscillatory integrands.
"""

from __future__ import annotations

import numpy as np

_PRIMES = (2, 3, 5, 7, 11, 13)


def splitmix64(seed: int, n: int = 1) -> np.ndarray:
    """Return n pseudo-random uint64 words derived from a 64-bit seed."""
    out = np.empty(n, dtype=np.uint64)
    state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    golden = np.uint64(0x9E3779B97F4A7C15)
    with np.errstate(over="ignore"):
        for i in range(n):
            state = state + golden
            z = state
            z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            out[i] = z ^ (z >> np.uint64(31))
    return out


def _radical_inverse(idx: np.ndarray, base: int) -> np.ndarray:
    out = np.zeros(idx.shape, dtype=np.float64)
    scale = 1.0 / base
    work = idx.copy()
    while np.any(work > 0):
        work, digit = np.divmod(work, base)
        out += digit * scale
        scale /= base
    return out


def lowdisc_unit(dim: int, n: int, seed: int, start_index: int = 0) -> np.ndarray:
    """n low-discrepancy points in [0,1)^dim, indices start_index..start_index+n-1."""
    if dim < 1 or dim > len(_PRIMES) or n < 0:
        raise ValueError(f"dim must be in 1..{len(_PRIMES)} and n >= 0")
    shifts = splitmix64(seed, dim).astype(np.float64) / 2.0 ** 64
    idx = np.arange(start_index + 1, start_index + n + 1, dtype=np.int64)
    cols = [
        (_radical_inverse(idx, _PRIMES[j]) + shifts[j]) % 1.0 for j in range(dim)
    ]
    return np.stack(cols, axis=1)


def lowdisc_box(low, high, n: int, seed: int, start_index: int = 0) -> np.ndarray:
    """Low-discrepancy points in the axis box [low, high]^dim (arrays per axis)."""
    low = np.atleast_1d(np.asarray(low, dtype=float))
    high = np.atleast_1d(np.asarray(high, dtype=float))
    u = lowdisc_unit(low.size, n, seed, start_index)
    return low[None, :] + u * (high - low)[None, :]
