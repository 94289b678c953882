"""SplitMix64 random stream, implemented in-repo so every platform agrees.

The generator is counter based: output k of a stream seeded with ``s`` is
``mix(s + (k + 1) * GOLDEN)``. That lets :meth:`Prng.next_block` and the
per-track lockstep engine in :mod:`layoutforge.metal` produce the exact
same values as the scalar path, just many at a time.

Integers in ``[lo, hi]`` come from a 128-bit multiply-shift,
``lo + (r * span) >> 64``, one draw per call and no rejection loop.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

_U32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


class EmptyIntervalError(ValueError):
    """rand_grid was asked for a value in an empty interval."""


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def splitmix64(x: int) -> int:
    """One SplitMix64 step from state ``x``; used to derive child seeds."""
    return mix64(x + GOLDEN)


def derive_seed(seed: int, salt: int) -> int:
    return splitmix64((seed & MASK64) ^ salt)


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(MIX1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(MIX2)
    z ^= z >> np.uint64(31)
    return z


def mulhi64(r: np.ndarray, span: np.ndarray) -> np.ndarray:
    """High 64 bits of the 128-bit product ``r * span`` (uint64 arrays)."""
    r = np.asarray(r, dtype=np.uint64)
    span = np.asarray(span, dtype=np.uint64)
    rl, rh = r & _U32, r >> _S32
    sl, sh = span & _U32, span >> _S32
    ll = rl * sl
    lh = rl * sh
    hl = rh * sl
    mid = (ll >> _S32) + (lh & _U32) + (hl & _U32)
    return rh * sh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)


class Prng:
    """Single-owner SplitMix64 stream."""

    __slots__ = ("state",)

    def __init__(self, seed: int = 0):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def next_block(self, n: int) -> np.ndarray:
        """The next ``n`` outputs as a uint64 array; advances the stream by ``n``."""
        steps = np.arange(1, n + 1, dtype=np.uint64)
        states = np.uint64(self.state) + steps * np.uint64(GOLDEN)
        self.state = (self.state + n * GOLDEN) & MASK64
        return mix64_array(states)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def random_block(self, n: int) -> np.ndarray:
        return (self.next_block(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def rand_int(self, lo: int, hi: int) -> int:
        if lo > hi:
            raise ValueError(f"rand_int: lo={lo} > hi={hi}")
        span = hi - lo + 1
        return lo + ((self.next_u64() * span) >> 64)

    def rand_grid(self, lo: int, hi: int, grid: int) -> int:
        if grid <= 0:
            raise ValueError(f"rand_grid: grid must be positive, got {grid}")
        if hi < lo:
            raise EmptyIntervalError(f"rand_grid: empty interval [{lo}, {hi}]")
        return lo + grid * self.rand_int(0, (hi - lo) // grid)

    def __repr__(self) -> str:
        return f"Prng(state=0x{self.state:016x})"


def rand_int(prng: Prng, lo: int, hi: int) -> int:
    return prng.rand_int(lo, hi)


def rand_grid(prng: Prng, lo: int, hi: int, grid: int) -> int:
    return prng.rand_grid(lo, hi, grid)
