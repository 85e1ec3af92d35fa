"""
Deterministic random number generation.

Every random draw in the toolkit comes from PCG32: a 64-bit LCG state with the
XSH-RR output permutation, seeded like the reference `pcg32_srandom_r(initstate,
initseq)`. `stream` is the initseq selector; the locked random prompt and the
synthetic generator use stream 0.

Vector draws advance the state in blocks with precomputed jump-ahead constants,
so `random_raw(n)` returns exactly the next n outputs of `next_uint32`.
Bootstrap resamples each get their own generator, seeded from `spawn_seeds`,
so resample b never depends on how many resamples run before or beside it.
"""
from functools import lru_cache
from typing import List, Optional, Tuple, Union

import numpy as np

GENERATOR_ID = "PCG32"
MULTIPLIER = 6364136223846793005
MASK64 = (1 << 64) - 1
MASK32 = (1 << 32) - 1
BLOCK = 4096
SPAWN_STREAM = 1

Size = Optional[Union[int, Tuple[int, ...]]]


def _xsh_rr(old: int) -> int:
    xorshifted = (((old >> 18) ^ old) >> 27) & MASK32
    rot = old >> 59
    return ((xorshifted >> rot) | (xorshifted << ((32 - rot) & 31))) & MASK32


def _xsh_rr_array(old: np.ndarray) -> np.ndarray:
    xorshifted = (((old >> 18) ^ old) >> 27).astype(np.uint32)
    rot = (old >> 59).astype(np.uint32)
    return (xorshifted >> rot) | (xorshifted << ((np.uint32(32) - rot) & np.uint32(31)))


@lru_cache(maxsize=16)
def _jump_table(inc: int):
    """Constants (A_j, C_j) with state_j = A_j * state_0 + C_j, for j = 0..BLOCK"""
    mult, incr = [1], [0]
    for _ in range(BLOCK):
        mult.append((mult[-1] * MULTIPLIER) & MASK64)
        incr.append((incr[-1] * MULTIPLIER + inc) & MASK64)
    return (mult, incr,
            np.array(mult[:BLOCK], dtype=np.uint64), np.array(incr[:BLOCK], dtype=np.uint64))


def _count(size: Size) -> int:
    return 1 if size is None else int(np.prod(size))


class PCG32:
    """PCG32 (XSH-RR) with the numpy-style draws the toolkit needs."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & MASK64
        self.stream = int(stream) & (MASK64 >> 1)
        self.inc = ((self.stream << 1) | 1) & MASK64
        self.state = 0
        self._step()
        self.state = (self.state + self.seed) & MASK64
        self._step()

    def __repr__(self):
        return f"PCG32(seed={self.seed}, stream={self.stream})"

    def _step(self):
        self.state = (self.state * MULTIPLIER + self.inc) & MASK64

    def next_uint32(self) -> int:
        old = self.state
        self._step()
        return _xsh_rr(old)

    def random_raw(self, n: int) -> np.ndarray:
        """The next n 32-bit outputs as uint32"""
        mult, incr, mult_arr, incr_arr = _jump_table(self.inc)
        out = np.empty(n, dtype=np.uint32)
        with np.errstate(over="ignore"):
            for start in range(0, n, BLOCK):
                m = min(BLOCK, n - start)
                states = np.uint64(self.state) * mult_arr[:m] + incr_arr[:m]
                out[start:start + m] = _xsh_rr_array(states)
                self.state = (mult[m] * self.state + incr[m]) & MASK64
        return out

    def bounded(self, bound: int) -> int:
        """Unbiased draw from [0, bound); rejects outputs below 2^32 mod bound"""
        threshold = ((1 << 32) - bound) % bound
        while True:
            r = self.next_uint32()
            if r >= threshold:
                return r % bound

    def integers(self, low: int, high: int, size: Size = None):
        """Uniform integers in [low, high). Rejected slots of a vector draw are redrawn in order."""
        bound = int(high) - int(low)
        if not 0 < bound <= MASK32:
            raise ValueError(f"PCG32 bounded draws need 0 < high - low < 2^32, got {bound}")
        if size is None:
            return int(low) + self.bounded(bound)
        threshold = ((1 << 32) - bound) % bound
        raw = self.random_raw(_count(size))
        values = raw.astype(np.int64) % bound
        for i in np.flatnonzero(raw < threshold):
            values[i] = self.bounded(bound)
        return (values + int(low)).reshape(size)

    def random(self, size: Size = None):
        """Doubles in [0, 1) with 53 random bits from two outputs"""
        raw = self.random_raw(2 * _count(size))
        hi = (raw[0::2] >> 5).astype(np.float64)
        lo = (raw[1::2] >> 6).astype(np.float64)
        u = (hi * 67108864.0 + lo) / 9007199254740992.0
        return float(u[0]) if size is None else u.reshape(size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size: Size = None):
        return low + (high - low) * self.random(size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size: Size = None):
        """Box-Muller, one normal per pair of uniforms"""
        u = self.random(2 * _count(size))
        radius = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        z = radius * np.cos(2.0 * np.pi * u[1::2])
        out = loc + scale * z
        return float(out[0]) if size is None else out.reshape(size)


def make_rng(seed: int, stream: int = 0) -> PCG32:
    """Generator for `seed` on `stream` (stream 0 unless stated)."""
    return PCG32(seed, stream)


def spawn_seeds(seed: int, n: int) -> List[int]:
    """n 64-bit child seeds from the master seed, indexed by task (drawn on SPAWN_STREAM)."""
    raw = PCG32(seed, SPAWN_STREAM).random_raw(2 * n).astype(np.uint64)
    return ((raw[0::2] << np.uint64(32)) | raw[1::2]).tolist()
