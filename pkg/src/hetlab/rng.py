"""Counter-based random numbers keyed by (seed, stream, counter).

The block cipher is Threefry-2x32 with 20 rounds. A stream is a path
index, so every path owns an independent sequence that does not depend on
how paths are grouped, ordered or spread over threads. Normals come from
Box-Muller on two 32-bit uniforms, which caps |z| at about 6.7.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

_M = np.uint64(0xFFFFFFFF)
_PARITY = np.uint64(0x1BD11BDA)
_INV32 = 2.0 ** -32
TWO_PI = 2.0 * math.pi
MAX_STREAM = 2 ** 32 - 1


@nb.njit(cache=True, inline="always")
def threefry2x32(k0, k1, c0, c1):
    """Encrypt counter (c0, c1) under key (k0, k1); all words are 32-bit values in uint64."""
    ks0 = np.uint64(k0) & _M
    ks1 = np.uint64(k1) & _M
    ks2 = _PARITY ^ ks0 ^ ks1
    ks = (ks0, ks1, ks2)
    x0 = (np.uint64(c0) + ks0) & _M
    x1 = (np.uint64(c1) + ks1) & _M
    # 20 rounds, unrolled; key injection after every fourth round
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(13)) | (x1 >> np.uint64(19))) & _M) ^ x0
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(15)) | (x1 >> np.uint64(17))) & _M) ^ x0
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(26)) | (x1 >> np.uint64(6))) & _M) ^ x0
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(6)) | (x1 >> np.uint64(26))) & _M) ^ x0
    x0 = (x0 + ks[1]) & _M
    x1 = (x1 + ks[2] + np.uint64(1)) & _M
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(17)) | (x1 >> np.uint64(15))) & _M) ^ x0
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(29)) | (x1 >> np.uint64(3))) & _M) ^ x0
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(16)) | (x1 >> np.uint64(16))) & _M) ^ x0
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(24)) | (x1 >> np.uint64(8))) & _M) ^ x0
    x0 = (x0 + ks[2]) & _M
    x1 = (x1 + ks[0] + np.uint64(2)) & _M
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(13)) | (x1 >> np.uint64(19))) & _M) ^ x0
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(15)) | (x1 >> np.uint64(17))) & _M) ^ x0
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(26)) | (x1 >> np.uint64(6))) & _M) ^ x0
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(6)) | (x1 >> np.uint64(26))) & _M) ^ x0
    x0 = (x0 + ks[0]) & _M
    x1 = (x1 + ks[1] + np.uint64(3)) & _M
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(17)) | (x1 >> np.uint64(15))) & _M) ^ x0
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(29)) | (x1 >> np.uint64(3))) & _M) ^ x0
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(16)) | (x1 >> np.uint64(16))) & _M) ^ x0
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(24)) | (x1 >> np.uint64(8))) & _M) ^ x0
    x0 = (x0 + ks[1]) & _M
    x1 = (x1 + ks[2] + np.uint64(4)) & _M
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(13)) | (x1 >> np.uint64(19))) & _M) ^ x0
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(15)) | (x1 >> np.uint64(17))) & _M) ^ x0
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(26)) | (x1 >> np.uint64(6))) & _M) ^ x0
    x0 = (x0 + x1) & _M
    x1 = (((x1 << np.uint64(6)) | (x1 >> np.uint64(26))) & _M) ^ x0
    x0 = (x0 + ks[2]) & _M
    x1 = (x1 + ks[0] + np.uint64(5)) & _M
    return x0, x1


@nb.njit(cache=True, inline="always")
def uniform_pair(k0, k1, stream, counter):
    a, b = threefry2x32(k0, k1, stream, counter)
    return (float(a) + 0.5) * _INV32, (float(b) + 0.5) * _INV32


@nb.njit(cache=True, inline="always")
def normal_pair(k0, k1, stream, counter):
    u1, u2 = uniform_pair(k0, k1, stream, counter)
    r = math.sqrt(-2.0 * math.log(u1))
    t = TWO_PI * u2
    return r * math.cos(t), r * math.sin(t)


@nb.njit(cache=True)
def _fill_normal(k0, k1, stream, start, out):
    m = out.shape[0]
    for i in range((m + 1) // 2):
        z0, z1 = normal_pair(k0, k1, stream, start + i)
        out[2 * i] = z0
        if 2 * i + 1 < m:
            out[2 * i + 1] = z1


@nb.njit(cache=True)
def _fill_uniform(k0, k1, stream, start, out):
    m = out.shape[0]
    for i in range((m + 1) // 2):
        u0, u1 = uniform_pair(k0, k1, stream, start + i)
        out[2 * i] = u0
        if 2 * i + 1 < m:
            out[2 * i + 1] = u1


@nb.njit(cache=True)
def normal_block(k0, k1, streams, counter, out):
    """out[i, :] = the normal pair of stream ``streams[i]`` at ``counter``."""
    for i in range(streams.shape[0]):
        z0, z1 = normal_pair(k0, k1, streams[i], counter)
        out[i, 0] = z0
        out[i, 1] = z1


def split_seed(seed: int) -> tuple[int, int]:
    """Key words of a 64-bit seed."""
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError(f"seed must lie in [0, 2**64), got {seed}")
    return seed & 0xFFFFFFFF, seed >> 32


def derive_seed(seed: int, *tags: int) -> int:
    """Independent 64-bit seed for a sub-experiment labelled by integer tags."""
    if not tags:
        return int(seed)
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(t) for t in tags))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class CounterRNG:
    """Stateful view of one stream, with a numpy-like sampling surface."""

    def __init__(self, seed: int, stream: int = 0, counter: int = 0):
        if not 0 <= stream <= MAX_STREAM:
            raise ValueError(f"stream must lie in [0, 2**32), got {stream}")
        self.seed = int(seed)
        self.k0, self.k1 = split_seed(seed)
        self.stream = int(stream)
        self.counter = int(counter)

    def _take(self, size) -> tuple[int, int, tuple]:
        shape = () if size is None else (tuple(size) if np.iterable(size) else (int(size),))
        m = int(np.prod(shape)) if shape else 1
        start = self.counter
        self.counter += (m + 1) // 2
        return start, m, shape

    def standard_normal(self, size=None):
        start, m, shape = self._take(size)
        out = np.empty(m)
        _fill_normal(self.k0, self.k1, self.stream, start, out)
        return float(out[0]) if not shape else out.reshape(shape)

    def random(self, size=None):
        start, m, shape = self._take(size)
        out = np.empty(m)
        _fill_uniform(self.k0, self.k1, self.stream, start, out)
        return float(out[0]) if not shape else out.reshape(shape)

    def uniform(self, low=0.0, high=1.0, size=None):
        u = self.random(size)
        return low + (high - low) * u

    def spawn(self, stream: int) -> "CounterRNG":
        return CounterRNG(self.seed, stream)
