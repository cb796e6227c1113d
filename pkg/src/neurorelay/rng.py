"""Counter-based deterministic noise generator.

Sweep noise must be reproducible bit-for-bit across hosts, languages, and
process restarts, and random access by (seed, sweep, channel) must be cheap
so simulated nodes can be replayed from any point. A stateful generator
cannot give that, so noise is derived from a pure counter scheme:

    stream key   K = little-endian u64 of blake2b-8(seed_u64 || sweep_u64 || channel_u32)
    raw word     x_i = mix64(K + (i + 1) * GAMMA)      (wrapping u64 arithmetic)
    uniform      u1 = ((x_{2j} >> 11) + 1) * 2^-53     in (0, 1]
                 u2 = (x_{2j+1} >> 11) * 2^-53         in [0, 1)
    gaussian     g_j = sqrt(-2 ln u1) * cos(2 pi u2)

where mix64 is the SplitMix64 finalizer and GAMMA = 0x9E3779B97F4A7C15.
Results are computed in float64 and consumed as float32, which absorbs
last-ulp libm differences between platforms.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
_MASK64 = 0xFFFFFFFFFFFFFFFF


def stream_key(seed: int, sweep: int, channel: int) -> int:
    """Derive the 64-bit counter base for one (seed, sweep, channel) stream."""
    packed = struct.pack("<QQI", seed & _MASK64, sweep & _MASK64, channel & 0xFFFFFFFF)
    digest = hashlib.blake2b(packed, digest_size=8).digest()
    return struct.unpack("<Q", digest)[0]


def mix64_scalar(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def gaussian_scalar(key: int, j: int) -> float:
    """Reference implementation of one draw; the vectorized path must match."""
    x1 = mix64_scalar((key + (2 * j + 1) * GAMMA) & _MASK64)
    x2 = mix64_scalar((key + (2 * j + 2) * GAMMA) & _MASK64)
    u1 = ((x1 >> 11) + 1) * 2.0 ** -53
    u2 = (x2 >> 11) * 2.0 ** -53
    return float(np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2))


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def gaussians(key: int, n: int) -> np.ndarray:
    """Draws 0..n-1 of the stream based at `key`, as float64."""
    if n <= 0:
        return np.zeros(0, dtype=np.float64)
    counters = np.arange(1, 2 * n + 1, dtype=np.uint64) * np.uint64(GAMMA)
    words = _mix64(np.uint64(key) + counters)
    u1 = ((words[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53
    u2 = (words[1::2] >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def channel_noise(seed: int, sweep: int, channel: int, n: int, sigma: float) -> np.ndarray:
    """n-sample float64 noise vector for one channel of one sweep."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        return np.zeros(n, dtype=np.float64)
    return gaussians(stream_key(seed, sweep, channel), n) * sigma
