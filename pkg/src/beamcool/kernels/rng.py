"""Deterministic noise streams: SplitMix64 feeding Box-Muller.

Each trajectory owns the substream seeded with (seed XOR trajectory_index),
so ensembles are reproducible and order-independent across workers. Every
normal draw consumes exactly two generator outputs (the sine partner is
discarded), which keeps the numpy and numba paths in lockstep.
"""

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0   # 2**-53


def splitmix64_stream(seed, count):
    """First `count` outputs of SplitMix64 from the given 64-bit seed."""
    out = np.empty(count, dtype=np.uint64)
    state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        for i in range(count):
            state = state + _GAMMA
            z = state
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            z = z ^ (z >> np.uint64(31))
            out[i] = z
    return out


def uniforms(seed, count):
    """Uniform (0, 1] doubles with 53-bit resolution."""
    raw = splitmix64_stream(seed, count)
    return ((raw >> _U53).astype(np.float64) + 1.0) * _INV53


def normals(seed, count):
    """Standard normal draws via Box-Muller (cosine branch only)."""
    u = uniforms(seed, 2 * count)
    u1 = u[0::2]
    u2 = u[1::2]
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def trajectory_seed(seed, index):
    """Substream seed for one ensemble member."""
    return (int(seed) ^ int(index)) & 0xFFFFFFFFFFFFFFFF


def wiener_increments(seed, index, steps, dt):
    """The dW sequence for trajectory `index`: N(0, dt) i.i.d. draws."""
    return normals(trajectory_seed(seed, index), steps) * np.sqrt(dt)
