from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advstream.attacks import BoostingAnalyst, RandomQueryAnalyst
from advstream.bsm_prg import PrgParams
from advstream.core_game import StatQuery, UnsupportedCapability, empirical_error, run_accuracy_game
from advstream.crypto_box import EncryptionScheme, sample_database
from advstream.randomness import TapeError
from advstream.reductions import (
    AnswerQueries,
    AnswerQueries2,
    MechanismConfig,
    answer_queries,
    answer_queries2,
    answer_queries2_natural,
    answer_queries_otp,
    measure_compression,
    replay_transcript,
)
from advstream.sada import ObliviousSada, SadaParams, SadaTruthEvaluator
from advstream.sada2 import ObliviousSada2, Sada2Params, Sada2TruthEvaluator

PRG = PrgParams(16, 8, 4)
SCHEME = EncryptionScheme(16)


def sada_params(n, d, gamma, rounds):
    return SadaParams(16, 8, d, n + rounds * (17 << d), n, gamma)


def sada2_params(d, gamma, m=256):
    return Sada2Params(d=d, m=m, kappa=16, psi=17, gamma=gamma)


class Fixed:
    def __init__(self, queries):
        self.queries = list(queries)

    def next_query(self, answers):
        return self.queries[len(answers)]


def aq_oracle(P, q, bot):
    return Fraction(bot + sum(q(p) for p in P), len(P) + bot)


def aq2_oracle(P, q, bot):
    present = set(P)
    return Fraction(bot + sum(q(p) for p in present), bot + len(present))


# ---------------------------------------------------------------------------
# AnswerQueries over SADA
# ---------------------------------------------------------------------------


def test_aq_brute_force_small():
    n, d = 4, 3
    params = sada_params(n, d, 0.5, 3)
    bot = params.bot_count
    rng = np.random.default_rng(0)
    for s in range(20):
        P = sample_database(s, n, d)
        qs = [StatQuery(rng.integers(0, 2, 1 << d)) for _ in range(3)]
        t = answer_queries(P, Fixed(qs), lambda tape: SadaTruthEvaluator(params, PRG), PRG, params, s)
        assert t.answers == [float(aq_oracle(P, q, bot)) for q in qs]


def test_aq_constant_queries():
    n, d = 6, 2
    params = sada_params(n, d, 0.25, 2)
    bot = params.bot_count
    qs = [StatQuery.constant(d, 1), StatQuery.constant(d, 0)]
    t = answer_queries(sample_database(1, n, d), Fixed(qs), lambda tape: SadaTruthEvaluator(params, PRG), PRG, params, 1)
    assert t.answers == [1.0, bot / (n + bot)]


def test_aq_and_otp_agree_on_exact_backend():
    n, d = 8, 3
    params = sada_params(n, d, 0.5, 3)
    for s in range(10):
        P = sample_database(s, n, d)
        a = answer_queries(P, RandomQueryAnalyst(d, 3, s), lambda t: SadaTruthEvaluator(params, PRG), PRG, params, s)
        b = answer_queries_otp(P, RandomQueryAnalyst(d, 3, s), lambda t: SadaTruthEvaluator(params, PRG), PRG, params, s)
        assert a == b


def test_outside_points_never_reach_oblivious_output():
    # coupling: same seed, same sample; only the pads of non-members differ
    n, d = 8, 3
    params = sada_params(n, d, 0.5, 2)
    for s in range(20):
        P = sample_database(s, n, d)
        factory = lambda tape: ObliviousSada(params, PRG, 12, tape)  # noqa: E731
        a = answer_queries(P, RandomQueryAnalyst(d, 2, s), factory, PRG, params, s)
        b = answer_queries_otp(P, RandomQueryAnalyst(d, 2, s), factory, PRG, params, s)
        assert a.answers == b.answers


def test_aq_determinism():
    n, d = 8, 3
    params = sada_params(n, d, 0.5, 2)
    P = sample_database(4, n, d)
    factory = lambda tape: ObliviousSada(params, PRG, 12, tape)  # noqa: E731
    runs = [answer_queries(P, RandomQueryAnalyst(d, 2, 4), factory, PRG, params, 4).serialize() for _ in range(2)]
    assert runs[0] == runs[1]


def test_aq_rejects_out_of_range_points():
    params = sada_params(4, 2, 0.5, 1)
    mech = AnswerQueries(params, PRG, lambda t: SadaTruthEvaluator(params, PRG), 0)
    with pytest.raises(ValueError):
        mech.prepare([0, 1, 2, 4])


# ---------------------------------------------------------------------------
# AnswerQueries2 over SADA2
# ---------------------------------------------------------------------------


def test_aq2_worked_example():
    params = sada2_params(2, 0.25, 64)
    P = [1, 2, 1, 2]
    q = StatQuery.indicator(2, [1])
    t = answer_queries2(P, Fixed([q]), lambda tape: Sada2TruthEvaluator(params, SCHEME.dec), SCHEME, params, 0, ell=1)
    assert t.answers == [float(Fraction(2, 3))]


def test_aq2_constant_zero_query():
    params = sada2_params(4, 0.5)
    for s in range(10):
        P = sample_database(s, 8, 4)
        for direct in (answer_queries2, answer_queries2_natural):
            t = direct(P, Fixed([StatQuery.constant(4, 0)]), lambda tape: Sada2TruthEvaluator(params, SCHEME.dec), SCHEME, params, s, ell=1)
            assert t.answers[0] == float(Fraction(params.bot_count, params.bot_count + len(set(P))))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.data())
def test_aq2_matches_closed_form(d, data):
    bot = data.draw(st.integers(1, (1 << d) - 1))
    params = sada2_params(d, bot / (1 << d))
    n = data.draw(st.integers(1, 12))
    seed = data.draw(st.integers(0, 2**31))
    P = sample_database(seed, n, d)
    qs = [StatQuery(np.array(data.draw(st.lists(st.integers(0, 1), min_size=1 << d, max_size=1 << d)))) for _ in range(2)]
    factory = lambda tape: Sada2TruthEvaluator(params, SCHEME.dec)  # noqa: E731
    for direct in (answer_queries2, answer_queries2_natural):
        t = direct(P, Fixed(qs), factory, SCHEME, params, seed, ell=2)
        assert t.answers == [float(aq2_oracle(P, q, bot)) for q in qs]
        # bias toward 1 from the padding points is the only gap to the distinct-point mean
        for q, z in zip(qs, t.answers):
            assert abs(z - q.empirical(sorted(set(P)))) <= bot / (bot + len(set(P))) + 1e-12


def test_aq2_duplicates_collapse():
    params = sada2_params(3, 0.25)
    q = StatQuery.indicator(3, [5])
    factory = lambda tape: Sada2TruthEvaluator(params, SCHEME.dec)  # noqa: E731
    once = answer_queries2([5, 6], Fixed([q]), factory, SCHEME, params, 0, ell=1)
    many = answer_queries2([5, 5, 5, 6, 6], Fixed([q]), factory, SCHEME, params, 0, ell=1)
    assert once.answers == many.answers


def test_natural_variant_only_differs_outside_database():
    params = sada2_params(3, 0.25)
    for s in range(10):
        P = sample_database(s, 6, 3)
        factory = lambda tape: ObliviousSada2(params, SCHEME.dec, 8, tape)  # noqa: E731
        a = answer_queries2(P, RandomQueryAnalyst(3, 3, s), factory, SCHEME, params, s, ell=3)
        b = answer_queries2_natural(P, RandomQueryAnalyst(3, 3, s), factory, SCHEME, params, s, ell=3)
        assert a.answers == b.answers


def test_scheme_width_mismatch():
    with pytest.raises(ValueError):
        AnswerQueries2(sada2_params(3, 0.25), EncryptionScheme(8), lambda t: None, 0)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def test_mechanism_config_violations():
    sp = sada_params(8, 3, 0.5, 2)
    s2 = sada2_params(3, 0.25, 64)
    assert MechanismConfig("AQ", sp, 2, 8).violations() == []
    assert MechanismConfig("AQ2", s2, 7, 8).violations() == []
    assert MechanismConfig("XX", sp, 2, 8).violations()[0].startswith("MechanismConfig.variant")
    assert MechanismConfig("AQ", s2, 2, 8).violations() == ["AQ needs SadaParams"]
    assert any("ell must equal" in v for v in MechanismConfig("AQ-OTP", sp, 3, 8).violations())
    assert any("n must equal" in v for v in MechanismConfig("AQ", sp, 2, 9).violations())
    assert any("must not exceed" in v for v in MechanismConfig("AQ2-NATURAL", s2, 8, 8).violations())
    assert MechanismConfig("AQ2", s2, 0, 8).violations()
    bad = SadaParams(16, 8, 3, 8 + 100, 8, 0.5)
    assert any("bulk length" in v for v in MechanismConfig("AQ", bad, 1, 8).violations())


# ---------------------------------------------------------------------------
# compression and replay
# ---------------------------------------------------------------------------


def test_measure_compression_is_deterministic():
    params = sada2_params(4, 0.5)
    P = sample_database(2, 8, 4)
    sizes = []
    for _ in range(2):
        mech = AnswerQueries2(params, SCHEME, lambda t: ObliviousSada2(params, SCHEME.dec, 8, t), 2)
        sizes.append(measure_compression(mech, P))
    assert sizes[0] == sizes[1] > 0
    assert sizes[0] == mech.switch_snapshot.nbits == mech.alg.state_bits()


def test_measure_compression_without_snapshot():
    class Opaque:
        def __init__(self, tape):
            pass

        def process(self, u):
            return 0.0

    params = sada2_params(3, 0.25)
    mech = AnswerQueries2(params, SCHEME, Opaque, 0)
    with pytest.raises(UnsupportedCapability):
        measure_compression(mech, [1, 2])
    mech = AnswerQueries2(params, SCHEME, lambda t: Sada2TruthEvaluator(params, SCHEME.dec), 0)
    mech.prepare([1, 2])
    with pytest.raises(UnsupportedCapability):
        measure_compression(mech)


@pytest.mark.parametrize("backend", ["exact", "oblivious"])
def test_replay_sada2(backend):
    params = sada2_params(4, 0.5)
    if backend == "exact":
        factory = lambda t: Sada2TruthEvaluator(params, SCHEME.dec)  # noqa: E731
        restore = lambda snap, t: Sada2TruthEvaluator.restore(snap, params, SCHEME.dec, t)  # noqa: E731
    else:
        factory = lambda t: ObliviousSada2(params, SCHEME.dec, 10, t)  # noqa: E731
        restore = lambda snap, t: ObliviousSada2.restore(snap, params, SCHEME.dec, 10, t)  # noqa: E731
    for s in range(10):
        P = sample_database(s, 8, 4)
        mech = AnswerQueries2(params, SCHEME, factory, s, record_snapshot=True)
        t = run_accuracy_game(mech, BoostingAnalyst(4, 5, s), P, 5, 4)
        fresh = AnswerQueries2(params, SCHEME, factory, s)
        again = replay_transcript(fresh, mech.switch_snapshot, restore, BoostingAnalyst(4, 5, s), 5, P)
        assert again.serialize() == t.serialize()


@pytest.mark.parametrize("backend", ["exact", "oblivious"])
def test_replay_sada(backend):
    n, d = 8, 3
    params = sada_params(n, d, 0.5, 3)
    if backend == "exact":
        factory = lambda t: SadaTruthEvaluator(params, PRG)  # noqa: E731
        restore = lambda snap, t: SadaTruthEvaluator.restore(snap, params, PRG, t)  # noqa: E731
    else:
        factory = lambda t: ObliviousSada(params, PRG, 12, t)  # noqa: E731
        restore = lambda snap, t: ObliviousSada.restore(snap, params, PRG, 12, t)  # noqa: E731
    for s in range(5):
        P = sample_database(s, n, d)
        mech = AnswerQueries(params, PRG, factory, s, record_snapshot=True)
        t = run_accuracy_game(mech, BoostingAnalyst(d, 3, s), P, 3, d)
        again = replay_transcript(AnswerQueries(params, PRG, factory, s), mech.switch_snapshot, restore, BoostingAnalyst(d, 3, s), 3, P)
        assert again.serialize() == t.serialize()


def test_tape_discipline():
    params = sada2_params(3, 0.25)
    mech = AnswerQueries2(params, SCHEME, lambda t: ObliviousSada2(params, SCHEME.dec, 4, t), 0)
    mech.prepare([1, 2, 3])
    assert mech.tape.tape_id == 2
    with pytest.raises(TapeError):
        mech.tape.switch_tape()


def test_exact_backend_accuracy_transfer():
    # with no sampling error the only deviation from the empirical mean is the padding bias
    n, d = 32, 4
    params = sada_params(n, d, 0.2, 4)
    bias = params.bot_count / (n + params.bot_count)
    for s in range(5):
        P = sample_database(s, n, d)
        t = answer_queries(P, BoostingAnalyst(d, 4, s), lambda tape: SadaTruthEvaluator(params, PRG), PRG, params, s)
        assert empirical_error(t, P) <= bias + 1e-12
