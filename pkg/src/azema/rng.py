"""Counter-based random streams.

Every draw is a pure function of ``(master_seed, stream_id, counter)``:
``raw = mix64(key + (counter + 1) * GOLDEN)`` with ``key`` derived from the
seed pair by the same mixer. This is SplitMix64 used as a counter-based
generator, so stream derivation and skipping ahead are O(1) and results do
not depend on how paths are scheduled across workers.

Simulation kernels use a fixed draw layout per jump ``i`` (0-based):
counter ``2*i`` feeds the uniform ``U`` and ``2*i + 1`` the jump mark.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import njit

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# 52 bits keep (k + 0.5) / 2**52 strictly inside (0, 1) in double precision.
_UNIFORM_SHIFT = 12
_UNIFORM_SCALE = 2.0**-52

_G = np.uint64(GOLDEN)
_C1 = np.uint64(_M1)
_C2 = np.uint64(_M2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S12 = np.uint64(_UNIFORM_SHIFT)
_S63 = np.uint64(63)
_ONE = np.uint64(1)


@dataclass(frozen=True)
class SeedSpec:
    """A (master seed, stream id) pair, both reduced to 64 bits."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "master_seed", int(self.master_seed) & MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & MASK64)

    def key(self):
        return stream_key(self.master_seed, self.stream_id)

    def as_dict(self):
        return {"master_seed": self.master_seed, "stream_id": self.stream_id}


# -- pure-Python scalar reference -------------------------------------------


def mix64(z):
    """SplitMix64 finalizer on Python ints."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def stream_key(master_seed, stream_id):
    h = mix64((int(master_seed) + GOLDEN) & MASK64)
    return mix64((h + mix64(((int(stream_id) + 1) * GOLDEN) & MASK64)) & MASK64)


def raw_draw(key, counter):
    return mix64((key + (counter + 1) * GOLDEN) & MASK64)


def to_uniform(raw):
    return ((raw >> _UNIFORM_SHIFT) + 0.5) * _UNIFORM_SCALE


def to_sign(raw):
    return 1.0 if raw >> 63 else -1.0


# -- compiled scalar kernels -------------------------------------------------


@njit
def mix64_nb(z):
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


@njit
def raw_nb(key, counter):
    return mix64_nb(key + (np.uint64(counter) + _ONE) * _G)


@njit
def uniform_nb(key, counter):
    return (float(raw_nb(key, counter) >> _S12) + 0.5) * _UNIFORM_SCALE


@njit
def sign_nb(key, counter):
    if raw_nb(key, counter) >> _S63:
        return 1.0
    return -1.0


# -- vectorised numpy kernels ------------------------------------------------


def mix64_np(z):
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


def raw_np(keys, counters):
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    return mix64_np(keys + (counters + _ONE) * _G)


def uniform_np(keys, counters):
    return ((raw_np(keys, counters) >> _S12).astype(np.float64) + 0.5) * _UNIFORM_SCALE


def sign_np(keys, counters):
    return np.where(raw_np(keys, counters) >> _S63, 1.0, -1.0)


def stream_keys(master_seed, stream_ids):
    """Vectorised :func:`stream_key` returning a uint64 array."""
    ids = np.asarray(stream_ids, dtype=np.uint64)
    h = np.uint64(mix64((int(master_seed) + GOLDEN) & MASK64))
    return mix64_np(h + mix64_np((ids + _ONE) * _G))


class Stream:
    """Single-owner sequential view of one counter-based stream."""

    def __init__(self, master_seed, stream_id=0, counter=0):
        self.seed = SeedSpec(master_seed, stream_id)
        self.key = self.seed.key()
        self.counter = counter

    def _next_raw(self):
        r = raw_draw(self.key, self.counter)
        self.counter += 1
        return r

    def draw_uniform(self):
        """A float strictly inside (0, 1)."""
        return to_uniform(self._next_raw())

    def draw_sign(self):
        """+1.0 or -1.0 with probability 1/2 each."""
        return to_sign(self._next_raw())

    def uniforms(self, size):
        """The next ``size`` uniforms as an array (advances the counter)."""
        c = np.arange(self.counter, self.counter + size, dtype=np.uint64)
        self.counter += size
        return uniform_np(np.uint64(self.key), c)

    def signs(self, size):
        c = np.arange(self.counter, self.counter + size, dtype=np.uint64)
        self.counter += size
        return sign_np(np.uint64(self.key), c)


def derive_stream(master_seed, stream_id):
    """Fresh stream for ``(master_seed, stream_id)`` positioned at counter 0."""
    return Stream(master_seed, stream_id)
