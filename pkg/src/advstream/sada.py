"""The SADA streaming problem: an exact evaluator and the sampling algorithm.

An update is the ``(d + b)``-bit integer ``p << b | k``; its *first bit* is
the most significant one, i.e. the top bit of ``p``.  The first ``n``
updates are data; after that the stream is cut into bulks of
``(a + 1) * 2**d`` updates.  For every point ``p`` in order a bulk carries
``a`` updates whose first bits spell ``Gamma_p`` and one more whose first bit
is ``sigma_p``, defining ``f(p, k) = sigma_p XOR PRG(Gamma_p, k)``.  At the end
of a bulk the target is the average of ``f`` over the data multiset padded
with ``bot_count`` copies of a bottom symbol on which ``f`` is 1.  Every other
step has target 0.
"""

from __future__ import annotations

import math
import struct
from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bsm_prg import PrgCursor, PrgParams, prg_eval_int
from .core_game import Snapshot
from .randomness import BitReader, BitWriter, RandomTape, bitlen

BOT = -1


class TruncationError(RuntimeError):
    """The stream stopped in the middle of a query bulk."""


class StreamOverflow(ValueError):
    """More updates than the configured stream length."""


@dataclass(frozen=True)
class SadaParams:
    a: int
    b: int
    d: int
    m: int
    n: int
    gamma: float

    def violations(self) -> list[str]:
        out = []
        for name in ("a", "b", "d", "m", "n"):
            if getattr(self, name) < 1:
                out.append(f"SadaParams.{name} must be a positive integer")
        if not 0 < self.gamma < 1:
            out.append("SadaParams.gamma must lie in (0, 1)")
            return out
        bot = self.gamma * self.n / (1 - self.gamma)
        if abs(bot - round(bot)) > 1e-9:
            out.append(f"SadaParams: gamma*n/(1-gamma) = {bot:g} is not an integer")
        if self.m < self.n or (self.m - self.n) % self.bulk_length:
            out.append(f"SadaParams: m - n = {self.m - self.n} is not a multiple of the bulk length (a+1)*2^d = {self.bulk_length}")
        return out

    def check(self) -> SadaParams:
        bad = self.violations()
        if bad:
            raise ValueError("; ".join(bad))
        return self

    @property
    def bot_count(self) -> int:
        return int(round(self.gamma * self.n / (1 - self.gamma)))

    @property
    def bulk_length(self) -> int:
        return (self.a + 1) << self.d

    @property
    def rounds(self) -> int:
        return (self.m - self.n) // self.bulk_length

    @property
    def update_bits(self) -> int:
        return self.d + self.b

    def validate_update(self, x: int) -> None:
        if not isinstance(x, (int, np.integer)) or isinstance(x, bool):
            raise TypeError(f"SADA update must be an integer, got {type(x).__name__}")
        if not 0 <= x < 1 << self.update_bits:
            raise ValueError(f"update {x} is not a {self.update_bits}-bit string")


def make_update(p: int, k: int, params: SadaParams) -> int:
    return (p << params.b) | k


def split_update(x: int, params: SadaParams) -> tuple[int, int]:
    return x >> params.b, x & ((1 << params.b) - 1)


def first_bit(x: int, params: SadaParams) -> int:
    return (x >> (params.update_bits - 1)) & 1


def filler_update(bit: int, params: SadaParams) -> int:
    """Query-phase update with the given first bit and all other bits zero."""
    return (bit & 1) << (params.update_bits - 1)


def sada_sample_size(alpha: float, gamma: float, m: int, beta: float, C: float = 8.0) -> int:
    """``ceil(C / (alpha**2 * gamma) * ln(3m / beta))``."""
    return math.ceil(C / (alpha * alpha * gamma) * math.log(3 * m / beta))


def _check_prg(params: SadaParams, prg: PrgParams) -> None:
    if prg.a != params.a or prg.b != params.b:
        raise ValueError(f"PRG shape (a={prg.a}, b={prg.b}) does not match SADA (a={params.a}, b={params.b})")
    prg.check()


class _Clock:
    """Step bookkeeping shared by the evaluator and the sampling algorithm."""

    def __init__(self, params: SadaParams) -> None:
        self.params = params
        self.step = 0

    def tick(self) -> int:
        self.step += 1
        if self.step > self.params.m:
            raise StreamOverflow(f"update {self.step} exceeds the stream length m={self.params.m}")
        return self.step

    def locate(self) -> tuple[int, int, bool]:
        """(point, offset within the point's a+1 updates, is last update of bulk)."""
        p = self.params
        r = (self.step - p.n - 1) % p.bulk_length
        point, off = divmod(r, p.a + 1)
        return point, off, r == p.bulk_length - 1

    def finish(self) -> None:
        p = self.params
        if self.step > p.n and (self.step - p.n) % p.bulk_length:
            done = (self.step - p.n) % p.bulk_length
            raise TruncationError(f"stream ended {done} updates into a bulk of {p.bulk_length}")


class SadaTruthEvaluator:
    """Exact, large-memory evaluator of the SADA target on every prefix.

    The data multiset is stored in full.  During a bulk only the current
    point's ``Gamma`` and the running numerator are kept.
    """

    def __init__(self, params: SadaParams, prg: PrgParams) -> None:
        self.params = params.check()
        _check_prg(params, prg)
        self.prg = prg
        self._clock = _Clock(params)
        self.counts: Counter[int] = Counter()
        self._gamma = 0
        self._numer = 0
        self._groups: dict[int, list[tuple[int, int]]] | None = None

    validate_update = property(lambda self: self.params.validate_update)

    @property
    def step(self) -> int:
        return self._clock.step

    def _by_point(self) -> dict[int, list[tuple[int, int]]]:
        if self._groups is None:
            groups: dict[int, list[tuple[int, int]]] = {}
            for x, c in sorted(self.counts.items()):
                p, k = split_update(x, self.params)
                groups.setdefault(p, []).append((k, c))
            self._groups = groups
        return self._groups

    def process(self, x: int) -> float:
        p = self.params
        i = self._clock.tick()
        if i <= p.n:
            self.counts[int(x)] += 1
            self._groups = None
            return 0.0
        point, off, last = self._clock.locate()
        bit = first_bit(x, p)
        if off < p.a:
            self._gamma = (self._gamma << 1) | bit
            return 0.0
        for k, c in self._by_point().get(point, ()):
            self._numer += c * (bit ^ prg_eval_int(self._gamma, k, self.prg))
        self._gamma = 0
        if last:
            bot = p.bot_count
            out = (bot + self._numer) / (p.n + bot)
            self._numer = 0
            return out
        return 0.0

    def finish(self) -> None:
        self._clock.finish()

    # -- state accounting -------------------------------------------------

    def _widths(self) -> tuple[int, int]:
        return bitlen(self.params.m), bitlen(self.params.n)

    def state_bits(self) -> int:
        wm, wn = self._widths()
        p = self.params
        return wm + wn + len(self.counts) * (p.d + p.b + wn) + p.a + wn

    def snapshot(self) -> Snapshot:
        wm, wn = self._widths()
        p = self.params
        w = BitWriter()
        w.write(self.step, wm)
        w.write(len(self.counts), wn)
        for x, c in sorted(self.counts.items()):
            w.write(x, p.d + p.b)
            w.write(c, wn)
        w.write(self._gamma, p.a)
        w.write(self._numer, wn)
        return Snapshot(w.to_bytes(), w.nbits)

    @classmethod
    def restore(cls, snap: Snapshot, params: SadaParams, prg: PrgParams, tape: RandomTape | None = None) -> SadaTruthEvaluator:
        ev = cls(params, prg)
        wm, wn = ev._widths()
        r = BitReader(snap.data)
        ev._clock.step = r.read(wm)
        for _ in range(r.read(wn)):
            x = r.read(params.d + params.b)
            ev.counts[x] = r.read(wn)
        ev._gamma = r.read(params.a)
        ev._numer = r.read(wn)
        return ev


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


class Reservoir:
    """``capacity`` independent single-slot reservoirs (sampling with replacement)."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError("reservoir capacity must be at least 1")
        self.slots = np.full(capacity, BOT, dtype=np.int64)
        self.seen = 0

    @property
    def capacity(self) -> int:
        return self.slots.size


def reservoir_feed(res: Reservoir, item: int, rng, copies: int = 1) -> Reservoir:
    """Feed ``copies`` identical items.

    Slot ``j`` holds the last item that replaced it, and the ``N``-th item
    replaces each slot independently with probability ``1/N``, so every slot
    is uniform over the items seen and the slots are independent.  The number
    of replaced slots is drawn as one binomial and the slots themselves as a
    uniform subset, which has the same joint law.  A run of ``c`` identical
    items following ``N0`` earlier ones lands in a slot with probability
    ``c / (N0 + c)``, so runs cost a single draw.
    """
    if copies <= 0:
        return res
    before = res.seen
    res.seen += copies
    if before == 0:
        res.slots[:] = item
        return res
    k = int(rng.binomial(res.capacity, copies / res.seen))
    if k:
        idx = rng.choice(res.capacity, size=k, replace=False)
        res.slots[idx] = item
    return res


class ObliviousSada:
    """Sampling algorithm for SADA: a reservoir over the data plus bottoms.

    When ``sample_size >= n + bot_count`` the sample is the padded multiset
    itself (a with-replacement sample can never be exactly ``S``) and the
    algorithm is exact.
    """

    def __init__(self, params: SadaParams, prg: PrgParams, sample_size: int, tape: RandomTape) -> None:
        self.params = params.check()
        _check_prg(params, prg)
        if sample_size < 1:
            raise ValueError("sample_size must be at least 1")
        self.prg = prg
        self.sample_size = sample_size
        self.tape = tape
        self._clock = _Clock(params)
        self.exact = sample_size >= params.n + params.bot_count
        self._items: list[int] = []
        self._reservoir = None if self.exact else Reservoir(sample_size)
        self._groups: dict[int, list[tuple[int, int]]] = {}
        self._bot = 0
        self._size = 0
        self._cursors: dict[int, PrgCursor] = {}
        self._numer = 0

    validate_update = property(lambda self: self.params.validate_update)

    @property
    def step(self) -> int:
        return self._clock.step

    def sample(self) -> np.ndarray:
        """Current sample; ``BOT`` marks bottom symbols."""
        if self.exact:
            return np.asarray(self._items, dtype=np.int64)
        return self._reservoir.slots.copy()

    def _feed(self, item: int, copies: int = 1) -> None:
        if self.exact:
            self._items.extend([item] * copies)
        else:
            reservoir_feed(self._reservoir, item, self.tape, copies)

    def _freeze(self) -> None:
        d = self.sample()
        self._size = int(d.size)
        self._bot = int(np.count_nonzero(d == BOT))
        groups: dict[int, Counter[int]] = {}
        for x in d[d != BOT].tolist():
            p, k = split_update(x, self.params)
            groups.setdefault(p, Counter())[k] += 1
        self._groups = {p: sorted(c.items()) for p, c in groups.items()}

    def process(self, x: int) -> float:
        p = self.params
        i = self._clock.tick()
        if i <= p.n:
            self._feed(int(x))
            if i == p.n:
                self._feed(BOT, p.bot_count)
                self._freeze()
            return 0.0
        point, off, last = self._clock.locate()
        bit = first_bit(x, p)
        if off == 0:
            self._cursors = {k: PrgCursor(k, self.prg) for k, _ in self._groups.get(point, ())}
        if off < p.a:
            for cur in self._cursors.values():
                cur.feed(bit)
            return 0.0
        for k, mult in self._groups.get(point, ()):
            if bit ^ self._cursors[k].result():
                self._numer += mult
        self._cursors = {}
        if last:
            out = (self._bot + self._numer) / self._size
            self._numer = 0
            return out
        return 0.0

    def finish(self) -> None:
        self._clock.finish()

    # -- state accounting -------------------------------------------------

    @property
    def record_bits(self) -> int:
        """Bits per sample slot: a bottom flag plus one ``(p, k)`` pair."""
        return 1 + self.params.d + self.params.b

    def _stored(self) -> int:
        return len(self._items) if self.exact else self.sample_size

    def state_bits(self) -> int:
        p = self.params
        w = self._counter_width()
        cursors = len(self._cursors) * PrgCursor.state_bits(self.prg)
        return 5 * w + self._stored() * self.record_bits + cursors

    def _counter_width(self) -> int:
        p = self.params
        return bitlen(max(p.m, p.n + p.bot_count, self.sample_size))

    def snapshot(self) -> Snapshot:
        p = self.params
        wm = self._counter_width()
        w = BitWriter()
        w.write(self.step, wm)
        w.write(self._reservoir.seen if self._reservoir else len(self._items), wm)
        stored = self.sample()
        w.write(stored.size, wm)
        for x in stored.tolist():
            w.write(1 if x == BOT else 0, 1)
            w.write(0 if x == BOT else x, p.d + p.b)
        w.write(self._numer, wm)
        w.write(len(self._cursors), wm)
        for k, cur in sorted(self._cursors.items()):
            w.write(k, p.b)
            w.write(cur.pos, bitlen(p.a))
            w.write(cur.parity, 1)
        return Snapshot(w.to_bytes(), w.nbits)

    @classmethod
    def restore(cls, snap: Snapshot, params: SadaParams, prg: PrgParams, sample_size: int, tape: RandomTape) -> ObliviousSada:
        alg = cls(params, prg, sample_size, tape)
        wm = alg._counter_width()
        r = BitReader(snap.data)
        alg._clock.step = r.read(wm)
        seen = r.read(wm)
        items = []
        for _ in range(r.read(wm)):
            is_bot = r.read(1)
            x = r.read(params.d + params.b)
            items.append(BOT if is_bot else x)
        if alg.exact:
            alg._items = items
        else:
            alg._reservoir.slots[:] = items
            alg._reservoir.seen = seen
        if alg.step >= params.n:
            alg._freeze()
        alg._numer = r.read(wm)
        for _ in range(r.read(wm)):
            k = r.read(params.b)
            pos = r.read(bitlen(params.a))
            alg._cursors[k] = PrgCursor(k, prg, pos=pos, parity=r.read(1))
        return alg


# ---------------------------------------------------------------------------
# stream files
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sIIIQQdQ")
MAGIC = b"SADA"


def write_stream(path: str | Path, params: SadaParams, updates: Iterable[int]) -> None:
    """Binary stream file.

    Layout: ``"SADA"``, then little-endian ``u32 a, u32 b, u32 d, u64 m,
    u64 n, f64 gamma, u64 count``, then the updates packed at ``d + b`` bits
    each.  Each update is written least-significant bit first and stream bit
    ``i`` is bit ``i % 8`` of byte ``i // 8``.
    """
    ups = [int(x) for x in updates]
    w = BitWriter()
    for x in ups:
        params.validate_update(x)
        w.write(x, params.update_bits)
    header = _HEADER.pack(MAGIC, params.a, params.b, params.d, params.m, params.n, params.gamma, len(ups))
    Path(path).write_bytes(header + w.to_bytes())


def read_stream(path: str | Path) -> tuple[SadaParams, list[int]]:
    data = Path(path).read_bytes()
    magic, a, b, d, m, n, gamma, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValueError(f"not a SADA stream file (magic {magic!r})")
    params = SadaParams(a, b, d, m, n, gamma)
    r = BitReader(data[_HEADER.size :])
    return params, [r.read(params.update_bits) for _ in range(count)]
