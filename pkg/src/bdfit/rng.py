"""Deterministic random number plumbing.

Every stochastic routine in this package draws from a xoshiro256++ stream
whose seed is derived from a 64-bit master seed by the mixing function

    substream_seed(master, label, index) =
        splitmix64(splitmix64(splitmix64(master) ^ fnv1a64(label)) + index)

with all arithmetic modulo 2**64.  The label is an ASCII stream name
("engine/skeleton", "replica", ...), the index is a replica number.  The
derivation is pure arithmetic, so replica streams are independent of worker
count and scheduling order: fanning the same replica set out over 1 or 32
processes yields bit-identical results.

A pure-Python xoshiro256++ generator lives here; `supercritical._kernels`
carries a numba twin of the same algorithm (cross-checked in the tests).
Vectorized batch code uses numpy Generators seeded through the same mixer.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_DOUBLE = 1.1102230246251565e-16  # 2**-53


def splitmix64(x: int) -> int:
    """One splitmix64 step (Steele, Lea, Flood 2014), modulo 2**64."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def fnv1a64(label: str) -> int:
    """64-bit FNV-1a hash of an ASCII stream label."""
    h = 0xCBF29CE484222325
    for byte in label.encode("ascii"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK
    return h


def substream_seed(master: int, label: str, index: int = 0) -> int:
    """Derive the 64-bit seed of substream (label, index) of a master seed."""
    s = splitmix64(master & _MASK)
    s = splitmix64(s ^ fnv1a64(label))
    return splitmix64((s + (index & _MASK)) & _MASK)


class Xoshiro256PP:
    """xoshiro256++ (Blackman, Vigna 2019), state expanded with splitmix64.

    Doubles carry the top 53 bits of each output word.  `random()` is in
    [0, 1), `exponential()` uses a draw from (0, 1] so log() is safe.
    """

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed: int):
        x = seed & _MASK
        x = splitmix64(x)
        self.s0 = x
        x = splitmix64(x)
        self.s1 = x
        x = splitmix64(x)
        self.s2 = x
        x = splitmix64(x)
        self.s3 = x

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        tmp = (s0 + s3) & _MASK
        out = ((((tmp << 23) | (tmp >> 41)) & _MASK) + s0) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return out

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * _DOUBLE

    def random_open(self) -> float:
        """Uniform double in the open interval (0, 1); rejects exact 0."""
        while True:
            u = (self.next_u64() >> 11) * _DOUBLE
            if u > 0.0:
                return u

    def exponential(self, rate: float) -> float:
        """Exponential holding time with the given rate (mean 1/rate)."""
        u = ((self.next_u64() >> 11) + 1) * _DOUBLE  # in (0, 1]
        return -math.log(u) / rate

    def randint(self, n: int) -> int:
        """Uniform integer in {1, ..., n}; bias is O(n * 2**-53)."""
        j = int(self.random() * n) + 1
        return n if j > n else j


def replica_seed(master: int, index: int) -> int:
    """Seed of the index-th replica of a run with the given master seed."""
    return substream_seed(master, "replica", index)


def numpy_generator(master: int, label: str, index: int = 0) -> np.random.Generator:
    """numpy Generator on a PCG64 stream seeded through the same mixer."""
    return np.random.Generator(np.random.PCG64(substream_seed(master, label, index)))
