"""Adaptive analysts and stream adversaries, including the membership-probe attack.

The attack exploits the fact that a sampling algorithm only tracks sampled
points.  Flipping the query value of one data point moves the output iff the
point is in the sample.  After probing, the attacker asks a query that is 1
exactly on the points it believes are unsampled: the true average counts
them, the sample never sees them.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from .core_game import StatQuery
from .crypto_box import EncryptionScheme
from .randomness import derive_rng
from .sada2 import DataUpdate, QueryRoundEncoder, QueryUpdate, Sada2Params

TARGETS = ("streaming-SADA2", "mechanism-ADA")


@dataclass(frozen=True)
class AttackConfig:
    probe_set_size: int
    decision_threshold: float | None = None
    target: str = "streaming-SADA2"
    seed: int = 0

    def violations(self, d: int | None = None) -> list[str]:
        out = []
        if self.probe_set_size < 1:
            out.append("AttackConfig.probe_set_size must be a positive integer")
        if d is not None and self.probe_set_size > 1 << d:
            out.append("AttackConfig.probe_set_size must not exceed 2^d")
        if self.decision_threshold is not None and self.decision_threshold <= 0:
            out.append("AttackConfig.decision_threshold must be positive")
        if self.target not in TARGETS:
            out.append(f"AttackConfig.target must be one of {', '.join(TARGETS)}")
        return out


def default_threshold(sample_size: int) -> float:
    """Half the smallest possible answer jump of a sample of this size."""
    return 1.0 / (2 * sample_size)


# ---------------------------------------------------------------------------
# analysts (accuracy game)
# ---------------------------------------------------------------------------


class MembershipProbeAnalyst:
    """Singleton probes followed by one evasion query.

    Round ``i < len(probes)`` asks the indicator of ``probes[i]``.  The
    baseline is the smallest probe answer (the all-zero query's value whenever
    at least one probe is unsampled), and a probe counts as sampled when its
    answer beats the baseline by more than ``threshold``.  The next round asks
    the indicator of the probes classified unsampled, and repeats it if more
    rounds are requested.  Budget: ``len(probes) + 1`` rounds.
    """

    def __init__(self, d: int, probes: Sequence[int], threshold: float = 1e-9) -> None:
        if not probes:
            raise ValueError("probe set must be non-empty")
        self.d = d
        self.probes = [int(p) for p in probes]
        self.threshold = threshold
        self.sampled: set[int] | None = None
        self.evasion: StatQuery | None = None

    @property
    def budget(self) -> int:
        return len(self.probes) + 1

    def next_query(self, answers: Sequence[float]) -> StatQuery:
        r = len(answers)
        if r < len(self.probes):
            return StatQuery.indicator(self.d, [self.probes[r]])
        if self.evasion is None:
            probe_answers = [answers[i] for i in range(len(self.probes))]
            base = min(probe_answers)
            self.sampled = {p for p, z in zip(self.probes, probe_answers) if z - base > self.threshold}
            self.evasion = StatQuery.indicator(self.d, [p for p in self.probes if p not in self.sampled])
        return self.evasion


class RandomQueryAnalyst:
    """Oblivious baseline: ``ell`` i.i.d. uniform query tables, answers ignored."""

    def __init__(self, d: int, ell: int, seed: int) -> None:
        self.d = d
        self.ell = ell
        self._rng = derive_rng(seed, "analyst", "random")
        self.emitted = 0

    def next_query(self, answers: Sequence[float]) -> StatQuery:
        if self.emitted >= self.ell:
            raise RuntimeError(f"analyst budget of {self.ell} queries exhausted")
        self.emitted += 1
        return StatQuery(self._rng.integers(0, 2, size=1 << self.d, dtype=np.uint8))


class BoostingAnalyst:
    """Random queries, then their answer-signed majority vote.

    Query ``i < ell`` is a uniform table; the final query is 1 at ``x`` when
    ``sum_i s_i (2 q_i(x) - 1) > 0`` with ``s_i`` the sign of the answer's
    deviation from the query's uniform mean.  It is the simplest analyst whose
    last query is fitted to the sample.
    """

    def __init__(self, d: int, ell: int, seed: int) -> None:
        if ell < 2:
            raise ValueError("boosting needs at least two rounds")
        self.d = d
        self.ell = ell
        self._rng = derive_rng(seed, "analyst", "boost")
        self._queries: list[StatQuery] = []

    def next_query(self, answers: Sequence[float]) -> StatQuery:
        r = len(answers)
        if r < self.ell - 1:
            q = StatQuery(self._rng.integers(0, 2, size=1 << self.d, dtype=np.uint8))
            self._queries.append(q)
            return q
        votes = np.zeros(1 << self.d)
        for q, z in zip(self._queries, answers):
            s = np.sign(z - q.mean())
            votes += s * (2.0 * q.table - 1.0)
        return StatQuery((votes > 0).astype(np.uint8))


# ---------------------------------------------------------------------------
# stream adversaries (streaming game)
# ---------------------------------------------------------------------------


class _Scripted:
    """Adversary written as a generator that reads ``self.outputs`` between yields."""

    def __init__(self) -> None:
        self.outputs: Sequence[float] = ()
        self._gen = self._script()
        self._last: Any = None
        self.emitted = 0

    def _script(self):
        raise NotImplementedError

    def next_update(self, outputs: Sequence[float]) -> Any:
        self.outputs = outputs
        try:
            self._last = next(self._gen)
        except StopIteration:
            # past the script: repeat the last update, which changes nothing
            pass
        self.emitted += 1
        return self._last


class AnalystStreamAdversary(_Scripted):
    """Turns an analyst into a SADA2 stream: data updates for ``P``, then encrypted rounds.

    The analyst sees the algorithm's output at the end of each round.  Keys
    and encryption coins follow the reduction paths under ``seed``.
    """

    def __init__(self, params: Sada2Params, scheme: EncryptionScheme, P: Sequence[int], analyst: Any, ell: int, seed: int) -> None:
        self.params = params
        self.scheme = scheme
        self.P = [int(p) for p in P]
        self.analyst = analyst
        self.ell = ell
        self.keys = [scheme.gen(derive_rng(seed, "key", p)) for p in range(1 << params.d)]
        self._rngs = [derive_rng(seed, "enc", p) for p in range(1 << params.d)]
        super().__init__()

    @property
    def length(self) -> int:
        return len(self.P) + (self.ell << self.params.d)

    def _script(self):
        for p in self.P:
            yield DataUpdate(p, self.keys[p])
        encoder = QueryRoundEncoder(self.keys, self.scheme.enc, self._rngs)
        answers: list[float] = []
        for j in range(1, self.ell + 1):
            if j > 1:
                answers.append(float(self.outputs[-1]))
            q = self.analyst.next_query(answers)
            yield from encoder.encode(q, j)


class MembershipProbeAdversary(_Scripted):
    """Per-step membership probing against a SADA2 algorithm.

    Script: data updates for ``P``; round ``j=1`` sets every probe's query
    value to 0; for each probe, ``j=2`` sets it to 1 (the output after this
    update is read) and ``j=3`` resets it to 0; finally ``j=4`` sets it to 1
    on every probe classified unsampled.  The stream has at most
    ``n + 4 * len(probes)`` updates and the output right after the
    ``j=1`` round is the baseline.
    """

    def __init__(
        self,
        params: Sada2Params,
        scheme: EncryptionScheme,
        P: Sequence[int],
        seed: int,
        probes: Sequence[int] | None = None,
        threshold: float = 1e-9,
    ) -> None:
        self.params = params
        self.scheme = scheme
        self.P = [int(p) for p in P]
        self.probes = sorted(set(self.P)) if probes is None else [int(p) for p in probes]
        self.threshold = threshold
        self.keys = {p: scheme.gen(derive_rng(seed, "key", p)) for p in set(self.P) | set(self.probes)}
        self._rngs = {p: derive_rng(seed, "enc", p) for p in self.keys}
        self.baseline: float | None = None
        self.jumps: dict[int, float] = {}
        self.sampled: set[int] = set()
        self.evasion_start: int | None = None
        super().__init__()

    @property
    def max_length(self) -> int:
        return len(self.P) + 4 * len(self.probes)

    @property
    def unsampled(self) -> list[int]:
        return [p for p in self.probes if p not in self.sampled]

    def _query(self, p: int, j: int, bit: int) -> QueryUpdate:
        return QueryUpdate(p, j, self.scheme.enc(bit, self.keys[p], self._rngs[p]))

    def _script(self):
        for p in self.P:
            yield DataUpdate(p, self.keys[p])
        for p in self.probes:
            yield self._query(p, 1, 0)
        self.baseline = float(self.outputs[-1])
        for p in self.probes:
            yield self._query(p, 2, 1)
            self.jumps[p] = float(self.outputs[-1]) - self.baseline
            if self.jumps[p] > self.threshold:
                self.sampled.add(p)
            yield self._query(p, 3, 0)
        self.evasion_start = len(self.outputs) + 1
        for p in self.unsampled:
            yield self._query(p, 4, 1)


@dataclass
class AttackReport:
    run_id: int
    recovered: int
    true_positive_rate: float
    phase2_error: float
    violated: bool

    def record(self) -> dict[str, Any]:
        return asdict(self)
