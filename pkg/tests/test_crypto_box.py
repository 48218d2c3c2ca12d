import numpy as np
import pytest

from advstream.attacks import MembershipProbeAnalyst, RandomQueryAnalyst
from advstream.crypto_box import (
    AdversaryB,
    Ciphertext,
    EncKey,
    EncryptionOracle,
    EncryptionScheme,
    OracleAbuse,
    adversary_B,
    estimate_semantic_advantage,
    keyed_bit,
    run_semantic_game,
    sample_database,
)
from advstream.randomness import RandomTape, derive_seed
from advstream.reductions import answer_queries2, answer_queries2_natural
from advstream.sada2 import ObliviousSada2, Sada2Params, Sada2TruthEvaluator

SCHEME = EncryptionScheme(16)


def test_default_psi():
    assert SCHEME.psi == 17
    with pytest.raises(ValueError):
        EncryptionScheme(0)
    with pytest.raises(ValueError):
        EncryptionScheme(8, 1)


def test_gen_deterministic_and_sized():
    a = SCHEME.gen(np.random.default_rng(3))
    b = SCHEME.gen(np.random.default_rng(3))
    assert a == b
    rng = np.random.default_rng(4)
    for _ in range(200):
        assert 0 <= SCHEME.gen(rng) < 1 << 16
    EncKey(a, 16)
    with pytest.raises(ValueError):
        EncKey(1 << 16, 16)


def test_gen_bits_are_balanced():
    rng = np.random.default_rng(5)
    keys = np.array([SCHEME.gen(rng) for _ in range(10_000)])
    for i in range(16):
        assert abs(((keys >> i) & 1).mean() - 0.5) <= 0.02


def test_round_trip():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        k = SCHEME.gen(rng)
        for msg in (0, 1):
            c = SCHEME.enc(msg, k, rng)
            assert 0 <= c < 1 << SCHEME.psi
            assert SCHEME.dec(c, k) == msg


def test_fresh_nonces():
    rng = np.random.default_rng(7)
    k = SCHEME.gen(rng)
    same = sum(SCHEME.enc(1, k, rng) == SCHEME.enc(1, k, rng) for _ in range(10_000))
    # collision probability per pair is 2^-16; 10^4 pairs expect 0.15 collisions
    assert same <= 3


def test_dec_is_total_and_deterministic():
    rng = np.random.default_rng(8)
    small = EncryptionScheme(4, 6)
    for k in range(16):
        for c in range(1 << 6):
            assert small.dec(c, k) in (0, 1)
        assert small.dec(63, k) == small.dec(63, k)
    k = SCHEME.gen(rng)
    ones = (1 << SCHEME.psi) - 1
    assert SCHEME.dec(ones, k) == SCHEME.dec(ones, k) == 1 ^ SCHEME.F(k, ones >> 1)


def test_dec_of_and_is_near_uniform():
    rng = np.random.default_rng(9)
    ones = 0
    n = 10_000
    for _ in range(n):
        k = SCHEME.gen(rng)
        c = SCHEME.enc(int(rng.integers(2)), k, rng) & SCHEME.enc(int(rng.integers(2)), k, rng)
        ones += SCHEME.dec(c, k)
    assert abs(ones / n - 0.5) <= 0.1


def test_keyed_bit_is_frozen():
    # F must not drift across versions; values pinned once
    assert [keyed_bit(1, n, 16, 16) for n in range(16)] == [0, 1, 1, 0, 0, 1, 1, 1, 0, 1, 0, 0, 0, 0, 0, 0]
    assert SCHEME.F(1, 5) == 1


def test_ciphertext_parse():
    c = Ciphertext.parse(0b1011, 4)
    assert (c.nonce, c.masked_bit) == (0b101, 1)
    assert c.value == 0b1011
    with pytest.raises(ValueError):
        Ciphertext.parse(16, 4)


# ---------------------------------------------------------------------------
# oracle game
# ---------------------------------------------------------------------------


class NoCalls:
    def run(self, oracle):
        return 1


class ZeroOnly:
    def __init__(self):
        self.seen = []

    def run(self, oracle):
        self.seen = [oracle(i, 0) for i in range(4)]
        return self.seen[0] & 1


def test_no_calls_is_world_independent():
    for s in range(20):
        assert run_semantic_game(NoCalls(), 4, 0, s, SCHEME) == run_semantic_game(NoCalls(), 4, 1, s, SCHEME)


def test_zero_messages_identical_worlds():
    for s in range(20):
        a, b = ZeroOnly(), ZeroOnly()
        run_semantic_game(a, 4, 0, s, SCHEME)
        run_semantic_game(b, 4, 1, s, SCHEME)
        assert a.seen == b.seen


def test_oracle_abuse_and_call_count():
    oracle = EncryptionOracle(SCHEME, 3, 1, 0)
    oracle(0, 1)
    oracle(2, 0)
    assert oracle.calls == 2
    for bad in (-1, 3, 1.5):
        with pytest.raises(OracleAbuse):
            oracle(bad, 1)


def test_oracle_world_semantics():
    one = EncryptionOracle(SCHEME, 2, 1, 5)
    zero = EncryptionOracle(SCHEME, 2, 0, 5)
    keys = one._keys
    assert SCHEME.dec(one(1, 1), keys[1]) == 1
    assert SCHEME.dec(zero(1, 1), keys[1]) == 0


def test_oracle_validates_inputs():
    with pytest.raises(ValueError):
        EncryptionOracle(SCHEME, 0, 1, 0)
    with pytest.raises(ValueError):
        EncryptionOracle(SCHEME, 1, 2, 0)


# ---------------------------------------------------------------------------
# adversary B
# ---------------------------------------------------------------------------


def test_exact_backend_no_failure():
    params = Sada2Params(d=6, m=1024, kappa=16, psi=17, gamma=0.25)
    for s in range(10):
        for world in (0, 1):
            adv = AdversaryB(
                lambda tape: Sada2TruthEvaluator(params, SCHEME.dec),
                lambda: RandomQueryAnalyst(6, 5, s),
                params,
                32,
                0.45,
                SCHEME,
                s,
                ell=5,
            )
            assert run_semantic_game(adv, 64, world, s, SCHEME) == 0
            assert adv.oracle_calls == 5 * (64 - len(set(adv.P)))


def test_world_transcripts_match_reductions():
    params = Sada2Params(d=4, m=128, kappa=16, psi=17, gamma=0.5)
    for s in range(10):
        def factory(tape):
            return ObliviousSada2(params, SCHEME.dec, 12, tape)

        for world, direct in ((1, answer_queries2), (0, answer_queries2_natural)):
            adv = adversary_B(factory, lambda: RandomQueryAnalyst(4, 4, s), params, 8, 0.3, SCHEME, s, ell=4)
            run_semantic_game(adv, 16, world, s, SCHEME)
            t = direct(adv.P, RandomQueryAnalyst(4, 4, s), factory, SCHEME, params, s, 4)
            assert t.serialize() == adv.transcript.serialize()
            assert t.answers == adv.transcript.answers


def test_database_sampling_path():
    assert sample_database(3, 10, 5) == sample_database(3, 10, 5)
    assert all(0 <= p < 32 for p in sample_database(3, 100, 5))


def test_probe_attack_advantage_is_measured():
    params = Sada2Params(d=4, m=128, kappa=16, psi=17, gamma=0.5)
    n = 8

    def make(seed):
        P = sample_database(seed, n, params.d)
        return AdversaryB(
            lambda tape: ObliviousSada2(params, SCHEME.dec, 16, tape),
            lambda: MembershipProbeAnalyst(params.d, sorted(set(P)), 1 / 32),
            params,
            n,
            0.2,
            SCHEME,
            seed,
            ell=len(set(P)) + 1,
        )

    est = estimate_semantic_advantage(make, 16, 500, derive_seed(1, "semantic"), SCHEME)
    assert est.trials == 500
    assert 0 <= est.advantage <= 1 and est.ci_halfwidth > 0
    assert abs(est.p_world1 - est.p_world0) == est.advantage


def test_tape_is_switched_after_data():
    params = Sada2Params(d=3, m=64, kappa=16, psi=17, gamma=0.25)
    tapes = []

    def factory(tape):
        tapes.append(tape)
        return ObliviousSada2(params, SCHEME.dec, 4, tape)

    adv = AdversaryB(factory, lambda: RandomQueryAnalyst(3, 2, 0), params, 4, 0.5, SCHEME, 0, ell=2)
    run_semantic_game(adv, 8, 1, 0, SCHEME)
    assert tapes[0].tape_id == 2
    assert isinstance(tapes[0], RandomTape)
