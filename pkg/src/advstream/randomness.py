"""Seed derivation, bit packing, and the two-tape coin abstraction.

Every random choice in the package is drawn from a generator derived from a
master seed plus a *path* of labels (``derive_rng(seed, "key", p)``).  Paths
make randomness order-independent: two programs that consume the same path
see the same bits regardless of what else they draw, which is what lets the
reductions and the encryption game reproduce each other bit for bit.
"""

from __future__ import annotations

import zlib
from typing import Any

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the SplitMix64 output function (Steele et al.)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _label(part: Any) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part) & 0xFFFFFFFF


def derive_seed(seed: int, *path: Any) -> int:
    """64-bit child seed for ``path`` under ``seed``."""
    h = splitmix64(seed & MASK64)
    for part in path:
        h = splitmix64(h ^ _label(part))
    return h


def derive_rng(seed: int, *path: Any) -> np.random.Generator:
    """Independent generator for ``path`` under ``seed``.

    Strings are hashed with CRC32, integers are used directly (mod 2**32).
    """
    key = tuple(_label(p) for p in path)
    ss = np.random.SeedSequence(entropy=seed & MASK64, spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def random_bits_int(rng: np.random.Generator, nbits: int) -> int:
    """Uniform integer in ``[0, 2**nbits)`` for any width."""
    if nbits <= 0:
        return 0
    if nbits <= 62:
        return int(rng.integers(0, 1 << nbits))
    bits = rng.integers(0, 2, size=nbits)
    return int("".join("1" if b else "0" for b in bits), 2)


def bitlen(n: int) -> int:
    """Bits needed to store integers in ``[0, n]``."""
    return max(1, int(n).bit_length())


class BitWriter:
    """Accumulates fixed-width unsigned fields into a packed bit string.

    Field values are laid down least-significant bit first; stream bit ``i``
    lives in byte ``i // 8`` at bit position ``i % 8`` (little-endian within
    bytes).
    """

    def __init__(self) -> None:
        self._acc = 0
        self.nbits = 0

    def write(self, value: int, width: int) -> None:
        if width < 0 or value < 0 or value >> width:
            raise ValueError(f"value {value} does not fit in {width} bits")
        self._acc |= value << self.nbits
        self.nbits += width

    def to_bytes(self) -> bytes:
        return self._acc.to_bytes((self.nbits + 7) // 8, "little")


class BitReader:
    def __init__(self, data: bytes) -> None:
        self._acc = int.from_bytes(data, "little")
        self._limit = len(data) * 8
        self.pos = 0

    def read(self, width: int) -> int:
        if self.pos + width > self._limit:
            raise ValueError("bit stream exhausted")
        value = (self._acc >> self.pos) & ((1 << width) - 1)
        self.pos += width
        return value


class TapeError(RuntimeError):
    pass


class RandomTape:
    """Read-once coin source with a single switch from tape 1 to tape 2.

    Streaming algorithms draw all their coins through a tape.  The reductions
    switch the tape once the data phase is over, so that the algorithm state
    at the switch point (plus tape 2) determines everything that follows.
    After :meth:`switch_tape` the tape-1 generator is dropped, so tape 1 can
    never be read again.

    The draw methods mirror :class:`numpy.random.Generator`.  ``cursor``
    counts draws on the current tape and only ever increases.
    """

    def __init__(self, tape1: np.random.Generator, tape2: np.random.Generator) -> None:
        self._tapes: list[np.random.Generator | None] = [tape1, tape2]
        self.tape_id = 1
        self.cursor = 0
        self.log: list[tuple[int, int]] = []

    @classmethod
    def from_seed(cls, seed: int) -> RandomTape:
        return cls(derive_rng(seed, "tape", 1), derive_rng(seed, "tape", 2))

    @classmethod
    def after_switch(cls, seed: int) -> RandomTape:
        """A tape positioned at the start of tape 2, as seen by a restored algorithm."""
        tape = cls(derive_rng(seed, "tape", 1), derive_rng(seed, "tape", 2))
        tape.switch_tape()
        return tape

    def switch_tape(self) -> None:
        if self.tape_id != 1:
            raise TapeError("tape already switched")
        self._tapes[0] = None
        self.tape_id = 2
        self.cursor = 0

    def _gen(self) -> np.random.Generator:
        gen = self._tapes[self.tape_id - 1]
        assert gen is not None
        self.cursor += 1
        self.log.append((self.tape_id, self.cursor))
        return gen

    def random(self, size=None):
        return self._gen().random(size)

    def integers(self, low, high=None, size=None):
        return self._gen().integers(low, high, size=size)

    def binomial(self, n, p, size=None):
        return self._gen().binomial(n, p, size)

    def choice(self, a, size=None, replace=True):
        return self._gen().choice(a, size=size, replace=replace)
