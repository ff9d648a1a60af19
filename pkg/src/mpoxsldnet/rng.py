"""Deterministic random streams for every stochastic decision in the pipeline.

All randomness flows from one master seed through named substreams, so a
training run is reproducible bit for bit and no stage can perturb another
stage's draws.  The derivation scheme:

    split shuffle        derive_seed(master, "split")
    epoch shuffle        derive_seed(master, "shuffle", epoch)
    per-image augment    derive_seed(master, "augment", epoch, record_id)
    weight init          derive_seed(master, "init", tensor_name)
    dropout masks        derive_seed(master, "dropout", layer_index)

Within a per-image augmentation stream the draw order is fixed: zoom factor,
then brightness factor, then the horizontal-flip coin.

Substreams are xoshiro256** generators seeded from splitmix64.  Bulk fills
(weight tensors, dropout masks) consume a single xoshiro draw and expand it
through the closed-form splitmix64 sequence, which vectorizes over numpy
uint64 arrays; the scalar and vectorized paths agree element for element.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(z: int) -> int:
    """splitmix64 finalizer: a 64-bit avalanche permutation."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def derive_seed(master: int, *path: object) -> int:
    """Derive the seed of a named substream from the master seed.

    Path components may be strings or integers; they are hashed in order so
    that distinct paths give independent streams.
    """
    h = mix64(master)
    for part in path:
        h = mix64(h ^ _fnv1a(str(part).encode("utf-8")))
    return h


class SplitMix64:
    """Scalar splitmix64 stream; mainly used to seed xoshiro state."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return mix64(self._state)


def _bulk_u64(seed: int, n: int) -> np.ndarray:
    """The first n outputs of splitmix64(seed), computed in one vector pass."""
    idx = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + idx * np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** stream seeded via splitmix64, per the generator's spec."""

    def __init__(self, seed: int):
        sm = SplitMix64(seed)
        self._s = [sm.next_u64() for _ in range(4)]
        if not any(self._s):  # all-zero state is a fixed point
            self._s[0] = 1

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """One double in [lo, hi), from the top 53 bits of the next draw."""
        u = (self.next_u64() >> 11) * 2.0**-53
        return lo + (hi - lo) * u

    def below(self, n: int) -> int:
        """Integer in [0, n). Plain modulo; bias is irrelevant at our sizes."""
        return self.next_u64() % n

    def coin(self, p: float) -> bool:
        return self.uniform() < p

    def shuffle(self, seq: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.below(i + 1)
            seq[i], seq[j] = seq[j], seq[i]

    def permutation(self, n: int) -> list[int]:
        perm = list(range(n))
        self.shuffle(perm)
        return perm

    def fill_uniform(self, shape, lo: float = 0.0, hi: float = 1.0,
                     dtype=np.float32) -> np.ndarray:
        """Array of uniforms in [lo, hi). Consumes one stream draw, then
        expands it through the vectorized splitmix64 sequence."""
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        bits = _bulk_u64(self.next_u64(), n)
        u = (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53
        out = (lo + (hi - lo) * u).astype(dtype)
        return out.reshape(shape)
