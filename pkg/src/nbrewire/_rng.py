"""Deterministic per-replica random streams.

Every Monte Carlo replica gets its own stream keyed by (seed, replica id):
a splitmix64-seeded xoroshiro128++ generator. The same arithmetic is
implemented twice -- here in pure Python, and in the compiled kernels --
and the two are kept bit-for-bit identical, so results do not depend on
the backend or on the number of worker threads.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


def _mix64(z: int) -> int:
    """splitmix64 output function."""
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_state(seed: int, replica: int) -> tuple[int, int]:
    """Initial xoroshiro128++ state for stream (seed, replica)."""
    base = (int(seed) + (int(replica) + 1) * GOLDEN) & MASK64
    s0 = _mix64((base + GOLDEN) & MASK64)
    s1 = _mix64((base + 2 * GOLDEN) & MASK64)
    if s0 == 0 and s1 == 0:
        s1 = GOLDEN
    return s0, s1


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class ReplicaRng:
    """xoroshiro128++ stream for one replica.

    The draw methods mirror the kernel implementations exactly, including
    the convention that rand_below(1) consumes no randomness.
    """

    __slots__ = ("s0", "s1")

    def __init__(self, seed: int, replica: int = 0):
        self.s0, self.s1 = stream_state(seed, replica)

    def next_u64(self) -> int:
        s0, s1 = self.s0, self.s1
        result = (_rotl((s0 + s1) & MASK64, 17) + s0) & MASK64
        s1 ^= s0
        self.s0 = _rotl(s0, 49) ^ s1 ^ ((s1 << 21) & MASK64)
        self.s1 = _rotl(s1, 28)
        return result

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return float(self.next_u64() >> 11) * _INV_2_53

    def rand_below(self, n: int) -> int:
        """Unbiased uniform integer in [0, n). n == 1 draws nothing."""
        if n <= 1:
            if n == 1:
                return 0
            raise ValueError("rand_below needs n >= 1")
        t = ((1 << 64) - n) % n
        while True:
            x = self.next_u64()
            if x >= t:
                return x % n

    def bernoulli(self, p: float) -> bool:
        return self.uniform() < p

    def binomial(self, m: int, p: float) -> int:
        """Exact Binomial(m, p) draw.

        Inverse-transform from k=0 whenever (1-p)^m is representable,
        otherwise an explicit sum of Bernoullis. Both paths are exact;
        the split condition is itself computed in float so the kernels
        take the same branch.
        """
        if m <= 0:
            return 0
        if p <= 0.0:
            return 0
        if p >= 1.0:
            return m
        q0 = _float_pow(1.0 - p, m)
        if q0 > 0.0:
            ratio = p / (1.0 - p)
            u = self.uniform()
            k = 0
            q = q0
            c = q0
            while u > c and k < m:
                k += 1
                q = q * ratio * (m - k + 1) / k
                c += q
            return k
        k = 0
        for _ in range(m):
            if self.uniform() < p:
                k += 1
        return k

    def shuffle(self, arr) -> None:
        """In-place Fisher-Yates shuffle (descending index convention)."""
        for i in range(len(arr) - 1, 0, -1):
            j = self.rand_below(i + 1)
            arr[i], arr[j] = arr[j], arr[i]

    def permutation(self, n: int) -> np.ndarray:
        out = np.arange(n, dtype=np.int64)
        self.shuffle(out)
        return out


def _float_pow(base: float, e: int) -> float:
    """base**e by binary exponentiation; op-for-op identical to the kernels."""
    acc = 1.0
    b = base
    while e > 0:
        if e & 1:
            acc *= b
        b *= b
        e >>= 1
    return acc
