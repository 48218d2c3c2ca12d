"""Toy single-bit private-key encryption and the E0/E1 oracle game.

A ciphertext is a ``psi``-bit integer: the high ``psi - 1`` bits are a uniform
nonce and the low bit is ``msg XOR F(key, nonce)``.  ``F`` is the low bit of
keyed BLAKE2b over the nonce.  Decryption is total: every ``psi``-bit string
parses as (nonce, masked bit).

Nothing here is claimed secure.  The semantic game only measures advantage.
"""

from __future__ import annotations

import hashlib
from collections.abc import Callable
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Protocol

import numpy as np

from .core_game import Transcript, UniformDistribution, statistical_error
from .randomness import RandomTape, derive_rng, derive_seed, random_bits_int
from .sada2 import DataUpdate, QueryUpdate

_PERSON = b"advstream-F"


class OracleAbuse(RuntimeError):
    pass


@lru_cache(maxsize=1 << 18)
def keyed_bit(key: int, nonce: int, kappa: int, nonce_bits: int) -> int:
    """``F(key, nonce)``: low bit of BLAKE2b keyed with ``key`` over ``nonce``."""
    kb = key.to_bytes(max(1, (kappa + 7) // 8), "little")
    nb = nonce.to_bytes(max(1, (nonce_bits + 7) // 8), "little")
    return hashlib.blake2b(nb, key=kb, digest_size=8, person=_PERSON).digest()[0] & 1


@dataclass(frozen=True)
class EncKey:
    bits: int
    length: int

    def __post_init__(self) -> None:
        if not 0 <= self.bits < 1 << self.length:
            raise ValueError(f"key {self.bits} is not a {self.length}-bit string")


@dataclass(frozen=True)
class Ciphertext:
    nonce: int
    masked_bit: int
    psi: int

    @classmethod
    def parse(cls, c: int, psi: int) -> Ciphertext:
        if not 0 <= c < 1 << psi:
            raise ValueError(f"ciphertext {c} is not a {psi}-bit string")
        return cls(c >> 1, c & 1, psi)

    @property
    def value(self) -> int:
        return (self.nonce << 1) | self.masked_bit


class EncryptionScheme:
    """(Gen, Enc, Dec) on integers: keys are ``kappa``-bit, ciphertexts ``psi``-bit.

    ``psi`` defaults to ``kappa + 1`` (a ``kappa``-bit nonce).  BLAKE2b keys
    are at most 64 bytes, so ``kappa <= 512``.
    """

    def __init__(self, kappa: int, psi: int | None = None) -> None:
        psi = kappa + 1 if psi is None else psi
        if not 1 <= kappa <= 512:
            raise ValueError("kappa must lie in [1, 512]")
        if psi < 2:
            raise ValueError("psi must be at least 2 (one nonce bit and the masked bit)")
        self.kappa = kappa
        self.psi = psi

    def gen(self, rng: np.random.Generator) -> int:
        return random_bits_int(rng, self.kappa)

    def F(self, key: int, nonce: int) -> int:
        return keyed_bit(key, nonce, self.kappa, self.psi - 1)

    def enc(self, msg: int, key: int, rng: np.random.Generator) -> int:
        nonce = random_bits_int(rng, self.psi - 1)
        return (nonce << 1) | ((msg & 1) ^ self.F(key, nonce))

    def dec(self, c: int, key: int) -> int:
        return (c & 1) ^ self.F(key, c >> 1)

    def __repr__(self) -> str:
        return f"EncryptionScheme(kappa={self.kappa}, psi={self.psi})"


# ---------------------------------------------------------------------------
# oracle game
# ---------------------------------------------------------------------------


class EncryptionOracle:
    """``E_world(k_0 .. k_{N-1}, .)``: world 1 encrypts ``M``, world 0 encrypts 0.

    Key ``i`` comes from ``derive_rng(seed, "key", i)`` and its encryption
    coins from ``derive_rng(seed, "enc", i)``, the same paths the reduction
    mechanisms use for point ``i``.
    """

    def __init__(self, scheme: EncryptionScheme, N: int, world: int, seed: int) -> None:
        if N < 1:
            raise ValueError("N must be at least 1")
        if world not in (0, 1):
            raise ValueError("world must be 0 or 1")
        self.scheme = scheme
        self.N = N
        self.world = world
        self._keys = [scheme.gen(derive_rng(seed, "key", i)) for i in range(N)]
        self._rngs: dict[int, np.random.Generator] = {}
        self._seed = seed
        self.calls = 0

    def __call__(self, i: int, msg: int) -> int:
        if not isinstance(i, (int, np.integer)) or not 0 <= i < self.N:
            raise OracleAbuse(f"key index {i!r} outside [0, {self.N})")
        self.calls += 1
        rng = self._rngs.get(i)
        if rng is None:
            rng = self._rngs[i] = derive_rng(self._seed, "enc", int(i))
        return self.scheme.enc(msg if self.world == 1 else 0, self._keys[i], rng)


class OracleAdversary(Protocol):
    def run(self, oracle: Callable[[int, int], int]) -> int: ...


def run_semantic_game(adv: OracleAdversary, N: int, world: int, seed: int, scheme: EncryptionScheme) -> int:
    """Sample ``N`` keys, give ``adv`` oracle access, return its output bit."""
    oracle = EncryptionOracle(scheme, N, world, seed)
    return int(adv.run(oracle)) & 1


@dataclass
class SemanticAdvantage:
    p_world1: float
    p_world0: float
    advantage: float
    ci_halfwidth: float
    trials: int


def estimate_semantic_advantage(make_adv: Callable[[int], OracleAdversary], N: int, trials: int, seed: int, scheme: EncryptionScheme) -> SemanticAdvantage:
    """Advantage with independent seeds per world and trial."""
    ones = [0, 0]
    for world in (0, 1):
        for t in range(trials):
            s = derive_seed(seed, "world", world, t)
            ones[world] += run_semantic_game(make_adv(s), N, world, s, scheme)
    p1, p0 = ones[1] / trials, ones[0] / trials
    half = 1.96 * float(np.sqrt(p1 * (1 - p1) / trials + p0 * (1 - p0) / trials))
    return SemanticAdvantage(p1, p0, abs(p1 - p0), half, trials)


class AdversaryB:
    """The encryption adversary that wraps a streaming algorithm and an analyst.

    It draws ``n`` uniform points ``P``, generates its own keys for them,
    feeds the data updates, then for every round asks the analyst for a
    query, encrypts ``q_j(p)`` itself for ``p`` in ``P`` and asks the oracle
    for every other point.  It outputs 1 iff some answer is more than
    ``alpha`` away from the query's mean under the uniform distribution.

    Randomness follows the reduction mechanisms' paths under the same seed
    (``"P"``, ``"key"``, ``"enc"`` and the algorithm tapes), so world 1
    replays ``AnswerQueries2`` and world 0 replays ``AnswerQueries2Natural``.
    """

    def __init__(
        self,
        algorithm_factory: Callable[[RandomTape], Any],
        analyst_factory: Callable[[], Any],
        params: Any,
        n: int,
        alpha: float,
        scheme: EncryptionScheme,
        seed: int,
        ell: int | None = None,
    ) -> None:
        self.algorithm_factory = algorithm_factory
        self.analyst_factory = analyst_factory
        self.params = params
        self.n = n
        self.alpha = alpha
        self.scheme = scheme
        self.seed = seed
        self.ell = params.rounds(n) if ell is None else ell
        self.transcript: Transcript | None = None
        self.P: list[int] = []
        self.oracle_calls = 0

    def run(self, oracle: Callable[[int, int], int]) -> int:
        params, seed, scheme = self.params, self.seed, self.scheme
        d = params.d
        self.oracle_calls = 0
        self.P = sample_database(seed, self.n, d)
        members = set(self.P)
        keys = {p: scheme.gen(derive_rng(seed, "key", p)) for p in sorted(members)}
        enc_rngs = {p: derive_rng(seed, "enc", p) for p in sorted(members)}
        tape = RandomTape.from_seed(derive_seed(seed, "algorithm"))
        alg = self.algorithm_factory(tape)
        for p in self.P:
            alg.process(DataUpdate(p, keys[p]))
        tape.switch_tape()
        analyst = self.analyst_factory()
        transcript = Transcript()
        answers: list[float] = []
        for j in range(1, self.ell + 1):
            q = analyst.next_query(answers)
            z = 0.0
            for p in range(1 << d):
                if p in members:
                    c = scheme.enc(q(p), keys[p], enc_rngs[p])
                else:
                    c = oracle(p, q(p))
                    self.oracle_calls += 1
                z = alg.process(QueryUpdate(p, j, c))
            transcript.append(q, z)
            answers.append(float(z))
        self.transcript = transcript
        return int(statistical_error(transcript, UniformDistribution(d)) > self.alpha)


def adversary_B(algorithm_factory, analyst_factory, params, n: int, alpha: float, scheme: EncryptionScheme, seed: int, ell: int | None = None) -> AdversaryB:
    return AdversaryB(algorithm_factory, analyst_factory, params, n, alpha, scheme, seed, ell)


def sample_database(seed: int, n: int, d: int) -> list[int]:
    """``n`` i.i.d. uniform points of ``{0,1}^d`` from the ``"P"`` path."""
    return [int(x) for x in derive_rng(seed, "P").integers(0, 1 << d, size=n)]


__all__ = [
    "AdversaryB",
    "Ciphertext",
    "EncKey",
    "EncryptionOracle",
    "EncryptionScheme",
    "OracleAbuse",
    "SemanticAdvantage",
    "adversary_B",
    "estimate_semantic_advantage",
    "keyed_bit",
    "run_semantic_game",
    "sample_database",
]
