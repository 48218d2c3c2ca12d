"""Bounded-storage-model PRG and its real/ideal distinguishing experiments.

The generator is a sample-then-XOR construction.  The key seeds a SplitMix64
position selector that picks ``t`` distinct positions of the ``a``-bit public
block plus one mask bit; the output is the parity of the selected block bits
XOR the mask.  It reads ``t`` bits, non-adaptively, in one forward pass.

No security is claimed for it.  The experiments below measure how well a
storage-bounded adversary distinguishes it from random bits.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Protocol

import numpy as np

from .randomness import MASK64, derive_rng, derive_seed, random_bits_int, splitmix64


class SourceUnderflow(RuntimeError):
    pass


class StorageViolation(RuntimeError):
    def __init__(self, round_index: int, size: int, bound: int) -> None:
        super().__init__(f"round {round_index}: adversary state holds {size} bits, bound is {bound}")
        self.round_index = round_index


@dataclass(frozen=True)
class PrgParams:
    a: int
    b: int
    t: int
    c: int = 1

    def violations(self) -> list[str]:
        out = []
        for name in ("a", "b", "t", "c"):
            if getattr(self, name) < 1:
                out.append(f"PrgParams.{name} must be a positive integer")
        if self.t > self.a:
            out.append("PrgParams.t must not exceed a")
        if self.c > self.a / 4:
            out.append("PrgParams.c must be at most a/4")
        if self.c != 1:
            out.append("PrgParams.c is fixed to 1")
        return out

    def check(self) -> PrgParams:
        bad = self.violations()
        if bad:
            raise ValueError("; ".join(bad))
        return self


@dataclass(frozen=True)
class PrgKey:
    bits: int
    length: int

    def __post_init__(self) -> None:
        if self.length < 1 or not 0 <= self.bits < 1 << self.length:
            raise ValueError(f"key {self.bits} is not a {self.length}-bit string")


def _key_value(key: PrgKey | int, params: PrgParams) -> int:
    if isinstance(key, PrgKey):
        if key.length != params.b:
            raise ValueError(f"key has {key.length} bits, expected {params.b}")
        return key.bits
    if not 0 <= key < 1 << params.b:
        raise ValueError(f"key {key} is not a {params.b}-bit string")
    return int(key)


@lru_cache(maxsize=1 << 16)
def select_positions(key: int, a: int, b: int, t: int) -> tuple[tuple[int, ...], int]:
    """Sorted ``t`` distinct positions in ``[0, a)`` and the mask bit for ``key``.

    The ``b`` key bits are folded 64 at a time into a SplitMix64 state ``h``.
    Draw ``0`` gives the mask (top bit of ``splitmix64(h)``); draws
    ``1, 2, ...`` give candidate positions ``splitmix64(h + i) % a``, and a
    candidate already chosen is discarded and redrawn.
    """
    h = splitmix64(b)
    for shift in range(0, b, 64):
        h = splitmix64(h ^ ((key >> shift) & MASK64))
    mask = splitmix64(h) >> 63
    chosen: set[int] = set()
    i = 1
    while len(chosen) < t:
        chosen.add(splitmix64((h + i) & MASK64) % a)
        i += 1
    return tuple(sorted(chosen)), mask


class BitSource:
    """Forward-only source of public bits; counts reads and skips.

    ``read()`` returns the next bit, ``skip(k)`` discards ``k`` bits unread.
    Running past the end raises :class:`SourceUnderflow`.
    """

    def __init__(self, bits: Iterable[int], record: bool = False) -> None:
        self._it = iter(bits)
        self.position = 0
        self.reads = 0
        self.read_positions: list[int] | None = [] if record else None

    @classmethod
    def from_int(cls, value: int, a: int, record: bool = False) -> BitSource:
        """Bits of ``value`` as an ``a``-bit string, most significant bit first."""
        return cls(((value >> (a - 1 - i)) & 1 for i in range(a)), record=record)

    def _next(self) -> int:
        try:
            bit = next(self._it)
        except StopIteration:
            raise SourceUnderflow(f"public block exhausted after {self.position} bits") from None
        self.position += 1
        return int(bit) & 1

    def read(self) -> int:
        pos = self.position
        bit = self._next()
        self.reads += 1
        if self.read_positions is not None:
            self.read_positions.append(pos)
        return bit

    def skip(self, k: int) -> None:
        for _ in range(k):
            self._next()


def prg_eval(block: BitSource | Sequence[int] | np.ndarray, key: PrgKey | int, params: PrgParams) -> int:
    """One output bit of the generator on an ``a``-bit block.

    ``block`` is either a :class:`BitSource` (consumed exactly ``a`` bits,
    ``t`` of them read) or an in-memory sequence of ``a`` bits.
    """
    k = _key_value(key, params)
    positions, mask = select_positions(k, params.a, params.b, params.t)
    if not isinstance(block, BitSource):
        arr = np.asarray(block, dtype=np.uint8)
        if arr.size < params.a:
            raise SourceUnderflow(f"public block has {arr.size} bits, need {params.a}")
        return mask ^ (int(arr[list(positions)].sum()) & 1)
    start = block.position
    parity = mask
    for pos in positions:
        block.skip(start + pos - block.position)
        parity ^= block.read()
    block.skip(start + params.a - block.position)
    return parity


def prg_eval_int(block: int, key: int, params: PrgParams) -> int:
    """:func:`prg_eval` on a block given as an ``a``-bit integer, most significant bit first."""
    positions, mask = select_positions(key, params.a, params.b, params.t)
    top = params.a - 1
    parity = mask
    for pos in positions:
        parity ^= (block >> (top - pos)) & 1
    return parity


class PrgCursor:
    """Incremental evaluation of ``PRG(., key)`` fed one public bit at a time.

    Persistent state is the key, the position counter and the running parity;
    the selected positions are recomputed from the key on demand.
    """

    __slots__ = ("key", "params", "pos", "parity", "_selected")

    def __init__(self, key: int, params: PrgParams, pos: int = 0, parity: int | None = None) -> None:
        self.key = key
        self.params = params
        positions, mask = select_positions(key, params.a, params.b, params.t)
        self._selected = frozenset(positions)
        self.pos = pos
        self.parity = mask if parity is None else parity

    def feed(self, bit: int) -> None:
        if self.pos >= self.params.a:
            raise SourceUnderflow("cursor already consumed a full block")
        if self.pos in self._selected:
            self.parity ^= bit & 1
        self.pos += 1

    def result(self) -> int:
        if self.pos != self.params.a:
            raise SourceUnderflow(f"cursor saw {self.pos} of {self.params.a} bits")
        return self.parity

    @staticmethod
    def state_bits(params: PrgParams) -> int:
        return params.b + max(1, params.a.bit_length()) + 1


# ---------------------------------------------------------------------------
# real / ideal experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BsmExperimentConfig:
    T: int
    storage_bits: int
    trials: int
    seed: int = 0

    def violations(self, params: PrgParams | None = None, profile: str = "bounded") -> list[str]:
        out = []
        if self.T < 1:
            out.append("BsmExperimentConfig.T must be a positive integer")
        if self.storage_bits < 0:
            out.append("BsmExperimentConfig.storage_bits must be nonnegative")
        if self.trials < 1:
            out.append("BsmExperimentConfig.trials must be a positive integer")
        if params is not None and profile != "unbounded" and self.storage_bits > params.a / 2:
            out.append(f"{profile} profile requires storage_bits <= a/2")
        return out


class BsmAdversary(Protocol):
    def update(self, ys: Sequence[int], state: np.ndarray, block: np.ndarray) -> np.ndarray: ...

    def decide(self, ys: Sequence[int], state: np.ndarray, key: int) -> int: ...


def _run_experiment(adv: BsmAdversary, cfg: BsmExperimentConfig, params: PrgParams, seed: int, real: bool) -> int:
    # X and K come from one generator, ideal Y from another, so both
    # experiments see identical public bits and key under the same seed.
    xk = derive_rng(seed, "bsm", "xk")
    yrng = derive_rng(seed, "bsm", "y")
    key = random_bits_int(xk, params.b)
    state = np.zeros(cfg.storage_bits, dtype=np.uint8)
    ys: list[int] = []
    for t in range(1, cfg.T + 1):
        block = xk.integers(0, 2, size=params.a, dtype=np.uint8)
        y = prg_eval(block, key, params) if real else int(yrng.integers(0, 2))
        state = np.asarray(adv.update(tuple(ys), state, block), dtype=np.uint8).reshape(-1)
        if state.size > cfg.storage_bits:
            raise StorageViolation(t, state.size, cfg.storage_bits)
        ys.append(y)
    return int(adv.decide(tuple(ys), state, key)) & 1


def run_real_experiment(adv: BsmAdversary, cfg: BsmExperimentConfig, params: PrgParams, seed: int | None = None) -> int:
    return _run_experiment(adv, cfg, params, cfg.seed if seed is None else seed, real=True)


def run_ideal_experiment(adv: BsmAdversary, cfg: BsmExperimentConfig, params: PrgParams, seed: int | None = None) -> int:
    return _run_experiment(adv, cfg, params, cfg.seed if seed is None else seed, real=False)


@dataclass(frozen=True)
class AdvantageEstimate:
    advantage: float
    ci_halfwidth: float
    p_real: float
    p_ideal: float
    trials: int


def estimate_advantage(adv: BsmAdversary, cfg: BsmExperimentConfig, params: PrgParams) -> AdvantageEstimate:
    """``|P_real[1] - P_ideal[1]|`` with a 95% normal-approximation half-width."""
    if cfg.trials < 100:
        raise ValueError("estimate_advantage needs at least 100 trials")
    n = cfg.trials
    real = sum(run_real_experiment(adv, cfg, params, derive_seed(cfg.seed, "real", i)) for i in range(n))
    ideal = sum(run_ideal_experiment(adv, cfg, params, derive_seed(cfg.seed, "ideal", i)) for i in range(n))
    p1, p0 = real / n, ideal / n
    half = 1.96 * math.sqrt(p1 * (1 - p1) / n + p0 * (1 - p0) / n)
    return AdvantageEstimate(abs(p1 - p0), half, p1, p0, n)


def advantage_record(profile: str, params: PrgParams, cfg: BsmExperimentConfig, est: AdvantageEstimate) -> dict[str, Any]:
    return {
        "profile": profile,
        "a": params.a,
        "b": params.b,
        "t": params.t,
        "T": cfg.T,
        "storage_bits": cfg.storage_bits,
        "trials": est.trials,
        "advantage": est.advantage,
        "ci_halfwidth": est.ci_halfwidth,
    }


# ---------------------------------------------------------------------------
# reference adversaries
# ---------------------------------------------------------------------------


class ConstantAdversary:
    def __init__(self, bit: int = 0) -> None:
        self.bit = bit

    def update(self, ys, state, block):
        return state

    def decide(self, ys, state, key):
        return self.bit


class FirstOutputAdversary:
    """Stores nothing and outputs ``Y_1``."""

    def update(self, ys, state, block):
        return state

    def decide(self, ys, state, key):
        return ys[0]


class WholeBlockAdversary:
    """Unbounded profile: keeps every block, recomputes all ``Y_t`` once it has ``K``."""

    def __init__(self, params: PrgParams) -> None:
        self.params = params

    def update(self, ys, state, block):
        return np.concatenate([state[: len(ys) * self.params.a], block])

    def decide(self, ys, state, key):
        a = self.params.a
        for t, y in enumerate(ys):
            if prg_eval(state[t * a : (t + 1) * a], key, self.params) != y:
                return 0
        return 1


class ForwardingAdversary:
    """Bounded profile: keeps no block bits, only the free past outputs.

    Outputs ``parity(Y_1..Y_T) XOR mask(K)``, a function of everything it is
    allowed to remember.
    """

    def __init__(self, params: PrgParams) -> None:
        self.params = params

    def update(self, ys, state, block):
        return state

    def decide(self, ys, state, key):
        _, mask = select_positions(key, self.params.a, self.params.b, self.params.t)
        return (sum(ys) & 1) ^ mask


class PrefixStoringAdversary:
    """Bounded profile: keeps the first ``storage_bits`` bits of the latest block.

    With ``K`` in hand it checks ``Y_T`` whenever every selected position
    falls inside the stored prefix, and otherwise forwards ``Y_T``.
    """

    def __init__(self, params: PrgParams, storage_bits: int) -> None:
        self.params = params
        self.storage_bits = storage_bits

    def update(self, ys, state, block):
        return np.asarray(block[: self.storage_bits], dtype=np.uint8)

    def decide(self, ys, state, key):
        positions, mask = select_positions(key, self.params.a, self.params.b, self.params.t)
        if positions[-1] < state.size:
            guess = mask ^ (int(state[list(positions)].sum()) & 1)
            return int(guess == ys[-1])
        return ys[-1]
