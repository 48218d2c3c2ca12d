"""The SADA2 streaming problem: a symmetric target built from AND-aggregated keys.

An update is a ``1 + d + log2(m) + psi``-bit string read most significant bit
first.  Tag 0 is a data update ``(p, k)`` with the ``kappa`` key bits right
after ``p`` and zero padding after them; tag 1 is a query update
``(p, j, c)``.  Keys of repeated data updates for one point are combined by
bitwise AND, as are ciphertexts of query updates that share the point's
largest index ``j``.  The target after every update is

    g = (gamma 2^d + sum over present p of dec(c_p, k_p)) / (gamma 2^d + #present)

with ``c_p`` all ones for points no query update has mentioned.
"""

from __future__ import annotations

import math
import struct
from collections import Counter
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .core_game import ProtocolViolation, Snapshot, StatQuery
from .randomness import BitReader, BitWriter, RandomTape, bitlen

DecFn = Callable[[int, int], int]
EncFn = Callable[[int, int, np.random.Generator], int]


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class Sada2Params:
    d: int
    m: int
    kappa: int
    psi: int
    gamma: float

    def violations(self) -> list[str]:
        out = []
        for name in ("d", "m", "kappa", "psi"):
            if getattr(self, name) < 1:
                out.append(f"Sada2Params.{name} must be a positive integer")
        if out:
            return out
        if not 0 < self.gamma < 1:
            out.append("Sada2Params.gamma must lie in (0, 1)")
        else:
            bot = self.gamma * (1 << self.d)
            if abs(bot - round(bot)) > 1e-9 or round(bot) < 1:
                out.append(f"Sada2Params: gamma*2^d = {bot:g} is not a positive integer")
        if self.m < 2 or self.m & (self.m - 1):
            out.append(f"Sada2Params.m = {self.m} must be a power of two (at least 2)")
        elif self.kappa > self.log_m + self.psi:
            out.append("Sada2Params.kappa must not exceed log2(m) + psi (data updates pad into that region)")
        return out

    def check(self) -> Sada2Params:
        bad = self.violations()
        if bad:
            raise ValueError("; ".join(bad))
        return self

    @property
    def bot_count(self) -> int:
        return int(round(self.gamma * (1 << self.d)))

    @property
    def log_m(self) -> int:
        return self.m.bit_length() - 1

    @property
    def width(self) -> int:
        return 1 + self.d + self.log_m + self.psi

    @property
    def all_ones(self) -> int:
        return (1 << self.psi) - 1

    @property
    def key_ones(self) -> int:
        return (1 << self.kappa) - 1

    def rounds(self, n: int) -> int:
        """Number of full query rounds that fit after ``n`` data updates."""
        return (self.m - n) >> self.d


@dataclass(frozen=True, slots=True)
class DataUpdate:
    p: int
    k: int


@dataclass(frozen=True, slots=True)
class QueryUpdate:
    p: int
    j: int
    c: int


Sada2Update = Union[DataUpdate, QueryUpdate]


def encode_update(u: Sada2Update, params: Sada2Params) -> int:
    tail = params.log_m + params.psi
    if isinstance(u, DataUpdate):
        return (u.p << tail) | (u.k << (tail - params.kappa))
    return (1 << (params.width - 1)) | (u.p << tail) | (u.j << params.psi) | u.c


def decode_update(x: int, params: Sada2Params) -> Sada2Update:
    if not 0 <= x < 1 << params.width:
        raise DecodeError(f"update {x} is not a {params.width}-bit string")
    tail = params.log_m + params.psi
    p = (x >> tail) & ((1 << params.d) - 1)
    rest = x & ((1 << tail) - 1)
    if x >> (params.width - 1):
        return QueryUpdate(p, rest >> params.psi, rest & params.all_ones)
    pad = tail - params.kappa
    if rest & ((1 << pad) - 1):
        raise DecodeError("data update has nonzero padding bits")
    return DataUpdate(p, rest >> pad)


def validate_update(u, params: Sada2Params) -> Sada2Update:
    """Decode integers and range-check every field; returns the typed update."""
    if isinstance(u, (int, np.integer)) and not isinstance(u, bool):
        return decode_update(int(u), params)
    if isinstance(u, DataUpdate):
        if not 0 <= u.p < 1 << params.d or not 0 <= u.k <= params.key_ones:
            raise DecodeError(f"data update {u} out of range")
        return u
    if isinstance(u, QueryUpdate):
        if not 0 <= u.p < 1 << params.d or not 0 <= u.j < params.m or not 0 <= u.c <= params.all_ones:
            raise DecodeError(f"query update {u} out of range")
        return u
    raise DecodeError(f"not a SADA2 update: {u!r}")


# ---------------------------------------------------------------------------
# exact evaluation
# ---------------------------------------------------------------------------


@dataclass
class Sada2State:
    """Exact state: AND-ed key per present point, (max j, AND-ed c) per queried point."""

    keys: dict[int, int] = field(default_factory=dict)
    queries: dict[int, tuple[int, int]] = field(default_factory=dict)

    def fold(self, u: Sada2Update) -> None:
        if isinstance(u, DataUpdate):
            self.keys[u.p] = self.keys[u.p] & u.k if u.p in self.keys else u.k
            return
        cur = self.queries.get(u.p)
        if cur is None or u.j > cur[0]:
            self.queries[u.p] = (u.j, u.c)
        elif u.j == cur[0]:
            self.queries[u.p] = (u.j, cur[1] & u.c)

    def ciphertext(self, p: int, params: Sada2Params) -> int:
        q = self.queries.get(p)
        return params.all_ones if q is None else q[1]


def sada2_truth_step(state: Sada2State, update, dec: DecFn, params: Sada2Params) -> float:
    """Fold ``update`` into ``state`` and return ``g`` recomputed from scratch."""
    state.fold(validate_update(update, params))
    bot = params.bot_count
    total = sum(dec(state.ciphertext(p, params), k) for p, k in state.keys.items())
    return (bot + total) / (bot + len(state.keys))


class Sada2TruthEvaluator:
    """Exact evaluator that keeps ``dec(c_p, k_p)`` per present point and a running sum."""

    def __init__(self, params: Sada2Params, dec: DecFn) -> None:
        self.params = params.check()
        self.dec = dec
        self.state = Sada2State()
        self._value: dict[int, int] = {}
        self._numer = 0
        self.step = 0

    def validate_update(self, u) -> None:
        validate_update(u, self.params)

    def _refresh(self, p: int) -> None:
        k = self.state.keys.get(p)
        if k is None:
            return
        v = self.dec(self.state.ciphertext(p, self.params), k)
        self._numer += v - self._value.get(p, 0)
        self._value[p] = v

    def value(self) -> float:
        bot = self.params.bot_count
        return (bot + self._numer) / (bot + len(self.state.keys))

    def process(self, update) -> float:
        u = validate_update(update, self.params)
        self.step += 1
        self.state.fold(u)
        self._refresh(u.p)
        return self.value()

    def _record_bits(self) -> int:
        p = self.params
        return p.d + p.kappa + p.log_m + p.psi

    def state_bits(self) -> int:
        p = self.params
        tracked = len(set(self.state.keys) | set(self.state.queries))
        return bitlen(p.m) + bitlen(1 << p.d) + tracked * (2 + self._record_bits())

    def snapshot(self) -> Snapshot:
        p = self.params
        w = BitWriter()
        w.write(self.step, bitlen(p.m))
        tracked = sorted(set(self.state.keys) | set(self.state.queries))
        w.write(len(tracked), bitlen(1 << p.d))
        for pt in tracked:
            w.write(pt, p.d)
            k = self.state.keys.get(pt)
            w.write(0 if k is None else 1, 1)
            w.write(0 if k is None else k, p.kappa)
            q = self.state.queries.get(pt)
            w.write(0 if q is None else 1, 1)
            j, c = (0, 0) if q is None else q
            w.write(j, p.log_m)
            w.write(c, p.psi)
        return Snapshot(w.to_bytes(), w.nbits)

    @classmethod
    def restore(cls, snap: Snapshot, params: Sada2Params, dec: DecFn, tape: RandomTape | None = None) -> Sada2TruthEvaluator:
        ev = cls(params, dec)
        r = BitReader(snap.data)
        ev.step = r.read(bitlen(params.m))
        for _ in range(r.read(bitlen(1 << params.d))):
            pt = r.read(params.d)
            has_k, k = r.read(1), r.read(params.kappa)
            has_q, j, c = r.read(1), r.read(params.log_m), r.read(params.psi)
            if has_k:
                ev.state.keys[pt] = k
            if has_q:
                ev.state.queries[pt] = (j, c)
            ev._refresh(pt)
        return ev


# ---------------------------------------------------------------------------
# sampling algorithm
# ---------------------------------------------------------------------------


def sada2_sample_size(alpha: float, gamma: float, m: int, beta: float, C: float = 8.0) -> int:
    """``ceil(C / (alpha**2 * gamma**2) * ln(3m / beta))``."""
    return math.ceil(C / (alpha * alpha * gamma * gamma) * math.log(3 * m / beta))


class ObliviousSada2:
    """Sampling algorithm for SADA2.

    ``D`` holds ``sample_size`` i.i.d. uniform elements of the ``2^d +
    gamma 2^d`` symbols, drawn from the tape at construction (element ids
    ``>= 2^d`` are bottoms).  A fixed multiset can be injected with
    ``sample`` instead.  Per-point state is kept only for sampled points and
    every sampled point counts with its multiplicity in ``D``.  When ``v`` is
    zero (no bottom sampled, no sampled point present) the output is 1, the
    value of an all-bottom set.
    """

    def __init__(
        self,
        params: Sada2Params,
        dec: DecFn,
        sample_size: int | None = None,
        tape: RandomTape | None = None,
        sample: Sequence[int] | None = None,
    ) -> None:
        self.params = params.check()
        self.dec = dec
        universe = (1 << params.d) + params.bot_count
        if sample is None:
            if sample_size is None or sample_size < 1:
                raise ValueError("sample_size must be at least 1")
            if tape is None:
                raise ValueError("a random tape is needed to draw the sample")
            sample = tape.integers(0, universe, size=sample_size)
        ids = np.asarray(sample, dtype=np.int64).reshape(-1)
        if ids.size < 1 or ids.min() < 0 or ids.max() >= universe:
            raise ValueError(f"sample must be a non-empty multiset of ids in [0, {universe})")
        self.sample_ids = ids
        self.sample_size = int(ids.size)
        points = ids[ids < 1 << params.d]
        self.bot_sampled = int(ids.size - points.size)
        self.mult: dict[int, int] = dict(Counter(points.tolist()))
        self.in_s: dict[int, bool] = {p: False for p in self.mult}
        self.keys: dict[int, int] = {p: params.key_ones for p in self.mult}
        self.js: dict[int, int] = {p: 0 for p in self.mult}
        self.cs: dict[int, int] = {p: params.all_ones for p in self.mult}
        self._numer = 0
        self._weight = 0
        self._value: dict[int, int] = {}
        self.step = 0

    def validate_update(self, u) -> None:
        validate_update(u, self.params)

    def output(self) -> float:
        v = self._weight + self.bot_sampled
        if v == 0:
            return 1.0
        return (self.bot_sampled + self._numer) / v

    def _refresh(self, p: int) -> None:
        if not self.in_s[p]:
            return
        v = self.dec(self.cs[p], self.keys[p])
        self._numer += self.mult[p] * (v - self._value.get(p, 0))
        self._value[p] = v

    def process(self, update) -> float:
        u = validate_update(update, self.params)
        self.step += 1
        p = u.p
        if p in self.mult:
            if isinstance(u, DataUpdate):
                if not self.in_s[p]:
                    self.in_s[p] = True
                    self._weight += self.mult[p]
                self.keys[p] &= u.k
            elif u.j == self.js[p]:
                self.cs[p] &= u.c
            elif u.j > self.js[p]:
                self.cs[p] = u.c
                self.js[p] = u.j
            self._refresh(p)
        return self.output()

    # -- state accounting -------------------------------------------------

    @property
    def record_bits(self) -> int:
        """Bits per sample slot: element id, inS, k_p, j_p and c_p."""
        p = self.params
        return bitlen((1 << p.d) + p.bot_count - 1) + 1 + p.kappa + p.log_m + p.psi

    def state_bits(self) -> int:
        return bitlen(self.params.m) + bitlen(self.sample_size) + self.sample_size * self.record_bits

    def snapshot(self) -> Snapshot:
        p = self.params
        idw = bitlen((1 << p.d) + p.bot_count - 1)
        w = BitWriter()
        w.write(self.step, bitlen(p.m))
        w.write(self.sample_size, bitlen(self.sample_size))
        for e in self.sample_ids.tolist():
            w.write(e, idw)
            if e < 1 << p.d:
                w.write(int(self.in_s[e]), 1)
                w.write(self.keys[e], p.kappa)
                w.write(self.js[e], p.log_m)
                w.write(self.cs[e], p.psi)
            else:
                w.write(0, 1 + p.kappa + p.log_m + p.psi)
        return Snapshot(w.to_bytes(), w.nbits)

    @classmethod
    def restore(cls, snap: Snapshot, params: Sada2Params, dec: DecFn, sample_size: int, tape: RandomTape | None = None) -> ObliviousSada2:
        idw = bitlen((1 << params.d) + params.bot_count - 1)
        r = BitReader(snap.data)
        step = r.read(bitlen(params.m))
        size = r.read(bitlen(sample_size))
        ids, rows = [], {}
        for _ in range(size):
            e = r.read(idw)
            ids.append(e)
            rows[e] = (r.read(1), r.read(params.kappa), r.read(params.log_m), r.read(params.psi))
        alg = cls(params, dec, sample=ids)
        alg.step = step
        for e in alg.mult:
            in_s, k, j, c = rows[e]
            alg.keys[e], alg.js[e], alg.cs[e] = k, j, c
            if in_s:
                alg.in_s[e] = True
                alg._weight += alg.mult[e]
                alg._refresh(e)
        return alg


# ---------------------------------------------------------------------------
# query rounds
# ---------------------------------------------------------------------------


def encode_query_round(
    q: StatQuery,
    j: int,
    keys: Sequence[int],
    enc: EncFn,
    rngs: Sequence[np.random.Generator],
    last_j: int = 0,
) -> list[QueryUpdate]:
    """``(1, p, j, Enc(q(p), k_p))`` for every point in order.

    ``rngs[p]`` supplies the encryption coins for point ``p``.
    """
    if j <= last_j:
        raise ProtocolViolation(j, f"round index {j} does not exceed previous index {last_j}")
    return [QueryUpdate(p, j, enc(q(p), keys[p], rngs[p])) for p in range(1 << q.d)]


class QueryRoundEncoder:
    """Stateful wrapper of :func:`encode_query_round` that enforces increasing ``j``."""

    def __init__(self, keys: Sequence[int], enc: EncFn, rngs: Sequence[np.random.Generator]) -> None:
        self.keys = keys
        self.enc = enc
        self.rngs = rngs
        self.last_j = 0

    def encode(self, q: StatQuery, j: int) -> list[QueryUpdate]:
        out = encode_query_round(q, j, self.keys, self.enc, self.rngs, self.last_j)
        self.last_j = j
        return out


# ---------------------------------------------------------------------------
# stream files
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sIQIIdQ")
MAGIC = b"SAD2"


def write_stream(path: str | Path, params: Sada2Params, updates: Iterable) -> None:
    """Binary stream file.

    Layout: ``"SAD2"``, little-endian ``u32 d, u64 m, u32 kappa, u32 psi,
    f64 gamma, u64 count``, then updates packed at ``width`` bits each,
    least-significant bit first (stream bit ``i`` is bit ``i % 8`` of byte
    ``i // 8``).
    """
    w = BitWriter()
    count = 0
    for u in updates:
        u = validate_update(u, params)
        w.write(encode_update(u, params), params.width)
        count += 1
    header = _HEADER.pack(MAGIC, params.d, params.m, params.kappa, params.psi, params.gamma, count)
    Path(path).write_bytes(header + w.to_bytes())


def read_stream(path: str | Path) -> tuple[Sada2Params, list[Sada2Update]]:
    data = Path(path).read_bytes()
    magic, d, m, kappa, psi, gamma, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValueError(f"not a SADA2 stream file (magic {magic!r})")
    params = Sada2Params(d, m, kappa, psi, gamma)
    r = BitReader(data[_HEADER.size :])
    return params, [decode_update(r.read(params.width), params) for _ in range(count)]
