"""Protocol engines for the adaptive streaming game and the accuracy game.

The streaming game alternates strictly: the adversary emits update ``x_i``
having seen ``z_1 .. z_{i-1}``, then the algorithm answers ``z_i``.  The
accuracy game is the query/answer loop between an analyst and a mechanism
holding a database.  Both engines are single threaded and deterministic
given the seeds of the handles passed in.
"""

from __future__ import annotations

import hashlib
import math
import struct
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass, field
from typing import Any, Protocol, runtime_checkable

import numpy as np

ANSWER_BITS = 16
_ANSWER_SCALE = (1 << ANSWER_BITS) - 1


class ProtocolViolation(RuntimeError):
    """A participant broke the game protocol at a given round (1-based)."""

    def __init__(self, round_index: int, message: str) -> None:
        super().__init__(f"round {round_index}: {message}")
        self.round_index = round_index


class UnsupportedCapability(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# statistical queries and transcripts
# ---------------------------------------------------------------------------


class StatQuery:
    """A {0,1}-valued predicate on ``{0,1}^d`` with value 1 on every bottom symbol.

    Points are integers in ``[0, 2**d)``; lexicographic order of bit strings is
    integer order.  The table is materialized, so a query is total by
    construction.
    """

    bottom_value = 1

    def __init__(self, table: Any) -> None:
        arr = np.array(table, dtype=np.uint8).reshape(-1)
        size = arr.size
        if size == 0 or size & (size - 1):
            raise ValueError(f"query table length {size} is not a power of two")
        if np.any(arr > 1):
            raise ValueError("query table must be {0,1}-valued")
        arr.setflags(write=False)
        self.table = arr
        self.d = size.bit_length() - 1
        self._qid: int | None = None

    @classmethod
    def from_function(cls, d: int, fn: Callable[[int], Any]) -> StatQuery:
        """Materialize ``fn`` on every point, checking that it is total and bit-valued."""
        values = []
        for p in range(1 << d):
            try:
                v = fn(p)
            except Exception as exc:  # noqa: BLE001 - any failure means "not total"
                raise ProtocolViolation(0, f"query undefined at point {p}: {exc}") from exc
            if v not in (0, 1, True, False):
                raise ProtocolViolation(0, f"query value {v!r} at point {p} is not a bit")
            values.append(int(v))
        return cls(values)

    @classmethod
    def constant(cls, d: int, bit: int) -> StatQuery:
        return cls(np.full(1 << d, bit, dtype=np.uint8))

    @classmethod
    def indicator(cls, d: int, points) -> StatQuery:
        table = np.zeros(1 << d, dtype=np.uint8)
        table[list(points)] = 1
        return cls(table)

    def __call__(self, point: int | None) -> int:
        if point is None or point < 0:
            return self.bottom_value
        return int(self.table[point])

    @property
    def qid(self) -> int:
        """32-bit identifier: the first four bytes of BLAKE2b over (d, table)."""
        if self._qid is None:
            h = hashlib.blake2b(bytes([self.d]) + np.packbits(self.table).tobytes(), digest_size=4)
            self._qid = int.from_bytes(h.digest(), "little")
        return self._qid

    def mean(self) -> float:
        """Value on the uniform distribution over ``{0,1}^d``."""
        return float(self.table.mean())

    def empirical(self, points: Sequence[int]) -> float:
        """Average over a database with multiset semantics."""
        idx = np.asarray(points, dtype=np.int64)
        return float(self.table[idx].mean())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, StatQuery) and self.d == other.d and np.array_equal(self.table, other.table)

    def __hash__(self) -> int:
        return self.qid

    def __repr__(self) -> str:
        return f"StatQuery(d={self.d}, ones={int(self.table.sum())}, qid={self.qid:#010x})"


@dataclass(frozen=True)
class Snapshot:
    """Serialized algorithm state; ``nbits`` is the exact payload length."""

    data: bytes
    nbits: int


def quantize_answer(z: float) -> int:
    return int(round(min(1.0, max(0.0, z)) * _ANSWER_SCALE))


def dequantize_answer(v: int) -> float:
    return v / _ANSWER_SCALE


@dataclass(frozen=True)
class TranscriptEntry:
    query_id: int
    answer: float
    query: StatQuery | None = field(default=None, compare=False, repr=False)


@dataclass
class Transcript:
    """Ordered (query, answer) pairs of one accuracy game.

    Answers are kept at full precision in memory; the canonical serialized
    form stores them as 16-bit fixed point.
    """

    entries: list[TranscriptEntry] = field(default_factory=list)

    def append(self, query: StatQuery, answer: float) -> None:
        self.entries.append(TranscriptEntry(query.qid, float(answer), query))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[TranscriptEntry]:
        return iter(self.entries)

    @property
    def answers(self) -> list[float]:
        return [e.answer for e in self.entries]

    @property
    def queries(self) -> list[StatQuery | None]:
        return [e.query for e in self.entries]

    def quantized(self) -> Transcript:
        return Transcript(
            [TranscriptEntry(e.query_id, dequantize_answer(quantize_answer(e.answer)), e.query) for e in self.entries]
        )

    def serialize(self) -> bytes:
        """``u32 count`` then ``(u32 query_id, u16 answer)`` per entry, little-endian."""
        out = [struct.pack("<I", len(self.entries))]
        for e in self.entries:
            out.append(struct.pack("<IH", e.query_id, quantize_answer(e.answer)))
        return b"".join(out)

    @classmethod
    def deserialize(cls, data: bytes) -> Transcript:
        (count,) = struct.unpack_from("<I", data, 0)
        if len(data) != 4 + 6 * count:
            raise ValueError(f"transcript payload has {len(data)} bytes, expected {4 + 6 * count}")
        entries = []
        for i in range(count):
            qid, ans = struct.unpack_from("<IH", data, 4 + 6 * i)
            entries.append(TranscriptEntry(qid, dequantize_answer(ans)))
        return cls(entries)


def transcript_bits(transcript: Transcript, answer_bits: int = ANSWER_BITS) -> int:
    """Bits needed to pin down a transcript when the analyst is deterministic.

    Queries are a function of earlier answers, so only the answers count.
    """
    return answer_bits * len(transcript)


def empirical_error(transcript: Transcript, database: Sequence[int]) -> float:
    """``max_i |q_i(S) - z_i|`` over the database (multiset semantics)."""
    worst = 0.0
    for e in transcript:
        if e.query is None:
            raise ValueError("transcript entry has no query attached")
        worst = max(worst, abs(e.query.empirical(database) - e.answer))
    return worst


class UniformDistribution:
    """Uniform distribution on ``{0,1}^d`` with an exact mean oracle."""

    def __init__(self, d: int) -> None:
        self.d = d

    def sample(self, rng: np.random.Generator, n: int) -> list[int]:
        return [int(x) for x in rng.integers(0, 1 << self.d, size=n)]

    def mean(self, query: StatQuery) -> float:
        return query.mean()


def statistical_error(transcript: Transcript, distribution: Any = None) -> float:
    """``max_i |q_i(D) - z_i|``; ``distribution`` needs a ``mean(query)`` method (default uniform)."""
    worst = 0.0
    for e in transcript:
        if e.query is None:
            raise ValueError("transcript entry has no query attached")
        mean = e.query.mean() if distribution is None else distribution.mean(e.query)
        worst = max(worst, abs(mean - e.answer))
    return worst


def flip_number(values: Sequence[float], alpha: float) -> int:
    """Greedy count of ``(1 + alpha)``-factor changes.

    The anchor starts at ``values[0]``; whenever a value leaves
    ``[anchor / (1 + alpha), anchor * (1 + alpha)]`` the count increases and the
    anchor moves to that value.  An anchor of zero is left exactly when a
    nonzero value appears, and a zero value always leaves a nonzero anchor.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if len(values) == 0:
        return 0
    factor = 1.0 + alpha
    anchor = values[0]
    flips = 0
    for v in values[1:]:
        if anchor == 0:
            moved = v != 0
        elif v == 0:
            moved = True
        else:
            moved = v > anchor * factor or v < anchor / factor
        if moved:
            flips += 1
            anchor = v
    return flips


# ---------------------------------------------------------------------------
# participant protocols
# ---------------------------------------------------------------------------


@runtime_checkable
class StreamingAlgorithm(Protocol):
    def process(self, update: Any) -> float: ...

    def state_bits(self) -> int: ...


class StreamAdversary(Protocol):
    def next_update(self, outputs: Sequence[float]) -> Any: ...


class Mechanism(Protocol):
    def prepare(self, database: Sequence[int]) -> None: ...

    def answer(self, query: StatQuery) -> float: ...


class Analyst(Protocol):
    def next_query(self, answers: Sequence[float]) -> StatQuery: ...


class _PrefixView(Sequence):
    """Read-only view of the first ``n`` items of a growing list."""

    __slots__ = ("_items", "_n")

    def __init__(self, items: list, n: int) -> None:
        self._items = items
        self._n = n

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, i):
        if isinstance(i, slice):
            return self._items[: self._n][i]
        if i < 0:
            i += self._n
        if not 0 <= i < self._n:
            raise IndexError(i)
        return self._items[i]


@dataclass(frozen=True)
class GameConfig:
    alpha: float
    beta: float
    ell: int
    n: int
    seed: int = 0

    def violations(self) -> list[str]:
        out = []
        if not 0 < self.alpha < 1:
            out.append("GameConfig.alpha must lie in (0, 1)")
        if not 0 < self.beta < 1:
            out.append("GameConfig.beta must lie in (0, 1)")
        if self.ell < 1:
            out.append("GameConfig.ell must be a positive integer")
        if self.n < 1:
            out.append("GameConfig.n must be a positive integer")
        if not 0 <= self.seed < 1 << 64:
            out.append("GameConfig.seed must be a 64-bit unsigned integer")
        return out


@dataclass
class GameReport:
    transcript: Transcript
    per_step_truth: list[float]
    per_step_output: list[float]
    error_flags: list[bool]
    max_empirical_error: float
    max_statistical_error: float | None
    flip_number: int
    peak_state_bits: int
    warnings: list[str] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(self.error_flags)


def run_streaming_game(
    algorithm: StreamingAlgorithm,
    adversary: StreamAdversary,
    m: int,
    truth_oracle: Any,
    alpha: float = 0.1,
    validate: Callable[[Any], None] | None = None,
) -> GameReport:
    """Play ``m`` rounds of the adaptive streaming game.

    ``truth_oracle`` is an exact streaming evaluator (``process(update) ->
    g(prefix)``).  A round is flagged when ``z_i`` falls outside
    ``(1 +- alpha) * g_i``.  Updates are checked with ``validate`` (or the
    algorithm's ``validate_update``) before the algorithm sees them.
    """
    check = validate if validate is not None else getattr(algorithm, "validate_update", None)
    outputs: list[float] = []
    truth: list[float] = []
    flags: list[bool] = []
    peak = algorithm.state_bits()
    for i in range(1, m + 1):
        x = adversary.next_update(_PrefixView(outputs, i - 1))
        if check is not None:
            try:
                check(x)
            except (ValueError, TypeError) as exc:
                raise ProtocolViolation(i, f"malformed update {x!r}: {exc}") from exc
        z = float(algorithm.process(x))
        g = float(truth_oracle.process(x))
        outputs.append(z)
        truth.append(g)
        flags.append(abs(z - g) > alpha * abs(g))
        peak = max(peak, algorithm.state_bits())

    warnings: list[str] = []
    for handle in (algorithm, truth_oracle):
        finish = getattr(handle, "finish", None)
        if finish is not None:
            try:
                finish()
            except Exception as exc:  # noqa: BLE001 - surfaced in the report
                warnings.append(f"{type(handle).__name__}: {exc}")
    max_err = max((abs(z - g) for z, g in zip(outputs, truth)), default=0.0)
    return GameReport(
        transcript=Transcript(),
        per_step_truth=truth,
        per_step_output=outputs,
        error_flags=flags,
        max_empirical_error=max_err,
        max_statistical_error=None,
        flip_number=flip_number(truth, alpha) if truth else 0,
        peak_state_bits=peak,
        warnings=warnings,
    )


def run_accuracy_game(
    mechanism: Mechanism,
    analyst: Analyst,
    database: Sequence[int],
    ell: int,
    d: int | None = None,
) -> Transcript:
    """The query/answer loop: the analyst sees ``z_1 .. z_{i-1}`` before choosing ``q_i``."""
    if len(database) == 0:
        raise ValueError("database must be non-empty")
    mechanism.prepare(database)
    transcript = Transcript()
    answers: list[float] = []
    for i in range(1, ell + 1):
        q = analyst.next_query(_PrefixView(answers, i - 1))
        if not isinstance(q, StatQuery):
            raise ProtocolViolation(i, f"analyst emitted {type(q).__name__}, not a total StatQuery")
        if d is not None and q.d != d:
            raise ProtocolViolation(i, f"query is over {{0,1}}^{q.d}, expected {{0,1}}^{d}")
        z = mechanism.answer(q)
        if not isinstance(z, (int, float, np.floating, np.integer)) or math.isnan(z):
            raise ProtocolViolation(i, f"mechanism returned non-numeric answer {z!r}")
        transcript.append(q, float(z))
        answers.append(float(z))
    return transcript


class ExactEmpiricalMechanism:
    """Answers every query with its exact empirical average on the database."""

    def prepare(self, database: Sequence[int]) -> None:
        self.database = list(database)

    def answer(self, query: StatQuery) -> float:
        return query.empirical(self.database)
