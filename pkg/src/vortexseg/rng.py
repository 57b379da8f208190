"""Deterministic random number generation for reproducible datasets.

Every random draw in this package routes through a splitmix64 stream so
that scans, point samplings and model initializations are bit-identical
across runs (and reproducible from a single 64-bit seed). The stream is
defined exactly:

    state_{i+1} = state_i + 0x9E3779B97F4A7C15           (mod 2**64)
    output_i    = mix(state_{i+1})                        (splitmix64 finalizer)
    uniform     = (output >> 11) * 2**-53                 in [0, 1)
    gaussians   = Box-Muller on consecutive uniform pairs (u1, u2):
                  r = sqrt(-2 * log1p(-u1)), angle = 2*pi*u2,
                  emitting r*cos(angle) then r*sin(angle)
    randbelow m = output mod m

Vectorised draws produce the same values as repeated scalar draws.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Domain tags keep derived streams (noise, sampling, ...) disjoint from the
# stream of the seed they derive from.
TAG_NOISE = 0x4E4F495345  # "NOISE"
TAG_SAMPLE = 0x53414D504C45  # "SAMPLE"

_U53_SCALE = 2.0**-53


def mix64(x: int) -> int:
    """splitmix64 output finalizer for a raw 64-bit state."""
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, tag: int) -> int:
    """Seed for a sub-stream of `seed`, disjoint from the stream itself."""
    return mix64((seed ^ tag) & _MASK64)


def _mix_vec(states: np.ndarray) -> np.ndarray:
    z = states.copy()
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX2)
    z ^= z >> np.uint64(31)
    return z


class Rng:
    """splitmix64 stream with scalar and vectorised draw methods."""

    def __init__(self, seed: int):
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self._state = seed

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return mix64(self._state)

    def next_u64_array(self, n: int) -> np.ndarray:
        steps = np.arange(1, n + 1, dtype=np.uint64)
        states = np.uint64(self._state) + np.uint64(_GOLDEN) * steps
        self._state = (self._state + n * _GOLDEN) & _MASK64
        return _mix_vec(states)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * _U53_SCALE

    def uniforms(self, n: int) -> np.ndarray:
        bits = self.next_u64_array(n) >> np.uint64(11)
        return bits.astype(np.float64) * _U53_SCALE

    def gaussians(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller; consumes 2*ceil(n/2) uniforms."""
        pairs = (n + 1) // 2
        u = self.uniforms(2 * pairs)
        u1, u2 = u[0::2], u[1::2]
        r = np.sqrt(-2.0 * np.log1p(-u1))
        angle = (2.0 * np.pi) * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(angle)
        out[1::2] = r * np.sin(angle)
        return out[:n]

    def randbelow(self, m: int) -> int:
        if m <= 0:
            raise ValueError(f"randbelow bound must be positive, got {m}")
        return self.next_u64() % m

    def sample_indices(self, total: int, take: int) -> np.ndarray:
        """First `take` entries of a partial Fisher-Yates shuffle of range(total)."""
        if not 0 <= take <= total:
            raise ValueError(f"cannot take {take} of {total} indices")
        idx = np.arange(total, dtype=np.int64)
        for i in range(take):
            j = i + self.randbelow(total - i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:take]

    def permutation(self, n: int) -> np.ndarray:
        return self.sample_indices(n, n)


def scan_seeds(master_seed: int, count: int) -> np.ndarray:
    """Per-scan seeds: the first `count` outputs of the stream seeded `master_seed`."""
    return Rng(master_seed).next_u64_array(count)
