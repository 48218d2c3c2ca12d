"""Mechanisms that answer statistical queries by driving a streaming algorithm.

``AnswerQueries`` feeds the database as SADA data updates and turns each
query into one bulk whose ``sigma_p`` bits are ``PRG(Gamma_p, k_p) XOR q(p)``,
so the bulk-end target equals the padded empirical average of ``q``.  With
``otp=True`` the pad for points outside the database is a fresh coin instead
of the PRG output.  ``AnswerQueries2`` does the same for SADA2 with one
encrypted query round per query; with ``natural=True`` points outside the
database get encryptions of 0.

All external randomness is path-derived from one seed: keys from
``("key", p)``, PRG blocks from ``("gamma", p)``, pads from ``("pad", p)``,
encryption coins from ``("enc", p)`` and the algorithm's two tapes from
``("algorithm",)``.  The algorithm's tape is switched right after the data
phase; its state at that point, together with this randomness, determines
the whole transcript.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any, Union

import numpy as np

from .bsm_prg import PrgParams, prg_eval_int
from .core_game import (
    Analyst,
    ProtocolViolation,
    Snapshot,
    StatQuery,
    Transcript,
    UnsupportedCapability,
    run_accuracy_game,
)
from .crypto_box import EncryptionScheme
from .randomness import RandomTape, derive_rng, derive_seed, random_bits_int
from .sada import SadaParams, filler_update, make_update
from .sada2 import DataUpdate, QueryRoundEncoder, Sada2Params

__all__ = [
    "AnswerQueries",
    "AnswerQueries2",
    "MechanismConfig",
    "RandomTape",
    "answer_queries",
    "answer_queries2",
    "answer_queries2_natural",
    "answer_queries_otp",
    "measure_compression",
    "replay_transcript",
]

VARIANTS = ("AQ", "AQ-OTP", "AQ2", "AQ2-NATURAL")

AlgorithmFactory = Callable[[RandomTape], Any]
RestoreFactory = Callable[[Snapshot, RandomTape], Any]


@dataclass(frozen=True)
class MechanismConfig:
    variant: str
    params: Union[SadaParams, Sada2Params]
    ell: int
    n: int

    def violations(self) -> list[str]:
        out = []
        if self.variant not in VARIANTS:
            return [f"MechanismConfig.variant must be one of {', '.join(VARIANTS)}"]
        sada = self.variant in ("AQ", "AQ-OTP")
        expected = SadaParams if sada else Sada2Params
        if not isinstance(self.params, expected):
            return [f"{self.variant} needs {expected.__name__}"]
        out.extend(self.params.violations())
        if out:
            return out
        if self.ell < 1:
            out.append("MechanismConfig.ell must be a positive integer")
        if sada:
            if self.n != self.params.n:
                out.append("MechanismConfig.n must equal SadaParams.n")
            if self.ell != self.params.rounds:
                out.append(f"MechanismConfig.ell must equal (m-n)/((a+1)*2^d) = {self.params.rounds}")
        elif self.ell > self.params.rounds(self.n):
            out.append(f"MechanismConfig.ell must not exceed (m-n)/2^d = {self.params.rounds(self.n)}")
        return out


def _z(value: Any, round_index: int) -> float:
    if not isinstance(value, (int, float, np.floating, np.integer)) or isinstance(value, bool) or np.isnan(value):
        raise ProtocolViolation(round_index, f"streaming algorithm returned non-numeric output {value!r}")
    return float(value)


class _Reduction:
    """Shared plumbing: database feeding, tape switch and switch-point snapshot."""

    d: int

    def __init__(self, algorithm_factory: AlgorithmFactory, seed: int, record_snapshot: bool) -> None:
        self.algorithm_factory = algorithm_factory
        self.seed = seed
        self.record_snapshot = record_snapshot
        self.switch_snapshot: Snapshot | None = None
        self.members: frozenset[int] = frozenset()
        self.rounds_done = 0
        self.alg: Any = None

    def _keys(self) -> list[int]:
        raise NotImplementedError

    def _data_update(self, p: int) -> Any:
        raise NotImplementedError

    def _start_query_phase(self) -> None:
        raise NotImplementedError

    def prepare(self, database: Sequence[int]) -> None:
        P = [int(p) for p in database]
        if any(not 0 <= p < 1 << self.d for p in P):
            raise ValueError(f"database points must lie in [0, 2^{self.d})")
        self.members = frozenset(P)
        self.keys = self._keys()
        self.tape = RandomTape.from_seed(derive_seed(self.seed, "algorithm"))
        self.alg = self.algorithm_factory(self.tape)
        for p in P:
            self.alg.process(self._data_update(p))
        self.tape.switch_tape()
        if self.record_snapshot:
            snap = getattr(self.alg, "snapshot", None)
            if snap is None:
                raise UnsupportedCapability(f"{type(self.alg).__name__} cannot serialize its state")
            self.switch_snapshot = snap()
        self._start_query_phase()

    def resume(self, alg: Any, members: Sequence[int]) -> None:
        """Continue from a restored algorithm as if the data phase had just ended."""
        self.members = frozenset(int(p) for p in members)
        self.keys = self._keys()
        self.alg = alg
        self._start_query_phase()


class AnswerQueries(_Reduction):
    """Database-to-SADA reduction; ``otp=True`` gives the one-time-pad variant."""

    def __init__(
        self,
        params: SadaParams,
        prg: PrgParams,
        algorithm_factory: AlgorithmFactory,
        seed: int,
        otp: bool = False,
        record_snapshot: bool = False,
    ) -> None:
        super().__init__(algorithm_factory, seed, record_snapshot)
        self.params = params.check()
        self.prg = prg
        self.otp = otp
        self.d = params.d

    def _keys(self) -> list[int]:
        return [random_bits_int(derive_rng(self.seed, "key", p), self.params.b) for p in range(1 << self.d)]

    def _data_update(self, p: int) -> int:
        return make_update(p, self.keys[p], self.params)

    def _start_query_phase(self) -> None:
        self.rounds_done = 0
        self._gamma_rngs = [derive_rng(self.seed, "gamma", p) for p in range(1 << self.d)]
        self._pad_rngs = [derive_rng(self.seed, "pad", p) for p in range(1 << self.d)]

    def answer(self, query: StatQuery) -> float:
        a, params = self.params.a, self.params
        self.rounds_done += 1
        z: Any = None
        for p in range(1 << self.d):
            gamma = random_bits_int(self._gamma_rngs[p], a)
            for i in range(a - 1, -1, -1):
                self.alg.process(filler_update((gamma >> i) & 1, params))
            if self.otp and p not in self.members:
                y = int(self._pad_rngs[p].integers(0, 2))
            else:
                y = prg_eval_int(gamma, self.keys[p], self.prg)
            z = self.alg.process(filler_update(y ^ query(p), params))
        return _z(z, self.rounds_done)


class AnswerQueries2(_Reduction):
    """Database-to-SADA2 reduction; ``natural=True`` encrypts 0 outside the database."""

    def __init__(
        self,
        params: Sada2Params,
        scheme: EncryptionScheme,
        algorithm_factory: AlgorithmFactory,
        seed: int,
        natural: bool = False,
        record_snapshot: bool = False,
    ) -> None:
        super().__init__(algorithm_factory, seed, record_snapshot)
        self.params = params.check()
        if scheme.kappa != params.kappa or scheme.psi != params.psi:
            raise ValueError("encryption scheme widths do not match the SADA2 parameters")
        self.scheme = scheme
        self.natural = natural
        self.d = params.d

    def _keys(self) -> list[int]:
        return [self.scheme.gen(derive_rng(self.seed, "key", p)) for p in range(1 << self.d)]

    def _data_update(self, p: int) -> DataUpdate:
        return DataUpdate(p, self.keys[p])

    def _start_query_phase(self) -> None:
        self.rounds_done = 0
        rngs = [derive_rng(self.seed, "enc", p) for p in range(1 << self.d)]
        self.encoder = QueryRoundEncoder(self.keys, self.scheme.enc, rngs)
        mask = np.zeros(1 << self.d, dtype=np.uint8)
        mask[list(self.members)] = 1
        self._member_mask = mask

    def answer(self, query: StatQuery) -> float:
        self.rounds_done += 1
        q = StatQuery(query.table & self._member_mask) if self.natural else query
        z: Any = None
        for u in self.encoder.encode(q, self.rounds_done):
            z = self.alg.process(u)
        return _z(z, self.rounds_done)


# ---------------------------------------------------------------------------
# one-call entry points
# ---------------------------------------------------------------------------


def answer_queries(P, analyst: Analyst, algorithm_factory: AlgorithmFactory, prg: PrgParams, params: SadaParams, seed: int, ell: int | None = None) -> Transcript:
    mech = AnswerQueries(params, prg, algorithm_factory, seed)
    return run_accuracy_game(mech, analyst, P, params.rounds if ell is None else ell, params.d)


def answer_queries_otp(P, analyst: Analyst, algorithm_factory: AlgorithmFactory, prg: PrgParams, params: SadaParams, seed: int, ell: int | None = None) -> Transcript:
    mech = AnswerQueries(params, prg, algorithm_factory, seed, otp=True)
    return run_accuracy_game(mech, analyst, P, params.rounds if ell is None else ell, params.d)


def answer_queries2(P, analyst: Analyst, algorithm_factory: AlgorithmFactory, scheme: EncryptionScheme, params: Sada2Params, seed: int, ell: int | None = None) -> Transcript:
    mech = AnswerQueries2(params, scheme, algorithm_factory, seed)
    return run_accuracy_game(mech, analyst, P, params.rounds(len(P)) if ell is None else ell, params.d)


def answer_queries2_natural(P, analyst: Analyst, algorithm_factory: AlgorithmFactory, scheme: EncryptionScheme, params: Sada2Params, seed: int, ell: int | None = None) -> Transcript:
    mech = AnswerQueries2(params, scheme, algorithm_factory, seed, natural=True)
    return run_accuracy_game(mech, analyst, P, params.rounds(len(P)) if ell is None else ell, params.d)


# ---------------------------------------------------------------------------
# compression accounting
# ---------------------------------------------------------------------------


def measure_compression(mechanism: _Reduction, database: Sequence[int] | None = None) -> int:
    """Bit size of the algorithm state at the tape switch.

    Runs ``prepare`` first when ``database`` is given.
    """
    if database is not None:
        mechanism.record_snapshot = True
        mechanism.prepare(database)
    if mechanism.switch_snapshot is None:
        if mechanism.alg is not None and getattr(mechanism.alg, "snapshot", None) is None:
            raise UnsupportedCapability(f"{type(mechanism.alg).__name__} cannot serialize its state")
        raise UnsupportedCapability("mechanism was prepared without recording the switch-point snapshot")
    return mechanism.switch_snapshot.nbits


def replay_transcript(
    mechanism: _Reduction,
    snapshot: Snapshot,
    restore: RestoreFactory,
    analyst: Analyst,
    ell: int,
    members: Sequence[int] = (),
) -> Transcript:
    """Rebuild the algorithm from ``snapshot`` and rerun the query phase.

    ``mechanism`` is a fresh instance with the same seed and parameters; the
    restored algorithm reads coins from tape 2 only.  ``members`` is needed
    only by the variants that treat points outside the database differently.
    """
    tape = RandomTape.after_switch(derive_seed(mechanism.seed, "algorithm"))
    mechanism.resume(restore(snapshot, tape), members)
    transcript = Transcript()
    answers: list[float] = []
    for i in range(1, ell + 1):
        q = analyst.next_query(answers)
        z = mechanism.answer(q)
        transcript.append(q, z)
        answers.append(z)
    return transcript
