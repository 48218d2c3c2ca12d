from fractions import Fraction

import numpy as np
import pytest

from advstream.attacks import (
    AnalystStreamAdversary,
    AttackConfig,
    AttackReport,
    BoostingAnalyst,
    MembershipProbeAdversary,
    MembershipProbeAnalyst,
    RandomQueryAnalyst,
    default_threshold,
)
from advstream.core_game import StatQuery, run_accuracy_game, run_streaming_game
from advstream.crypto_box import EncryptionScheme, sample_database
from advstream.reductions import AnswerQueries2, answer_queries2
from advstream.sada2 import ObliviousSada2, Sada2Params, Sada2TruthEvaluator

SCHEME = EncryptionScheme(16)
PARAMS = Sada2Params(d=4, m=256, kappa=16, psi=17, gamma=0.25)


def injected(sample):
    return lambda tape: ObliviousSada2(PARAMS, SCHEME.dec, sample=sample)


# ---------------------------------------------------------------------------
# accuracy-game analyst
# ---------------------------------------------------------------------------


def test_probe_analyst_against_exact_mechanism_finds_nothing():
    P = [1, 3, 5, 7, 9]
    probes = sorted(set(P))
    analyst = MembershipProbeAnalyst(4, probes)
    mech = AnswerQueries2(PARAMS, SCHEME, lambda t: Sada2TruthEvaluator(PARAMS, SCHEME.dec), 0)
    t = run_accuracy_game(mech, analyst, P, analyst.budget, 4)
    bot = PARAMS.bot_count
    # every singleton has the same exact answer, so nothing beats the baseline
    assert analyst.sampled == set()
    assert t.answers[-1] == float(Fraction(bot + len(probes), bot + len(probes)))


def test_probe_analyst_recovers_injected_sample():
    P = [1, 3, 5, 7, 9, 11]
    bot_id = 1 << PARAMS.d
    sample = [3, 3, 9, bot_id, bot_id + 1]
    analyst = MembershipProbeAnalyst(4, sorted(set(P)), default_threshold(len(sample)))
    mech = AnswerQueries2(PARAMS, SCHEME, injected(sample), 0)
    t = run_accuracy_game(mech, analyst, P, analyst.budget, 4)
    assert analyst.sampled == {3, 9}
    assert analyst.evasion == StatQuery.indicator(4, [1, 5, 7, 11])
    # sample sees only the two padding ids; truth counts the four evaded points
    assert t.answers[-1] == 2 / 5
    exact = Fraction(PARAMS.bot_count + 4, PARAMS.bot_count + 6)
    assert abs(t.answers[-1] - float(exact)) / float(exact) > 0.3


def test_probe_analyst_repeats_evasion_and_validates():
    analyst = MembershipProbeAnalyst(3, [2, 4])
    assert analyst.budget == 3
    assert analyst.next_query([]) == StatQuery.indicator(3, [2])
    e = analyst.next_query([0.5, 0.25])
    assert e == analyst.next_query([0.5, 0.25, 0.1]) == StatQuery.indicator(3, [4])
    with pytest.raises(ValueError):
        MembershipProbeAnalyst(3, [])


def test_default_threshold():
    assert default_threshold(8) == 1 / 16


def test_random_analyst_budget_and_determinism():
    a, b = RandomQueryAnalyst(5, 3, 7), RandomQueryAnalyst(5, 3, 7)
    qa = [a.next_query([0.0] * i) for i in range(3)]
    qb = [b.next_query([1.0] * i) for i in range(3)]
    assert qa == qb
    assert all(q.d == 5 for q in qa)
    with pytest.raises(RuntimeError):
        a.next_query([0.0] * 3)
    assert RandomQueryAnalyst(5, 1, 8).next_query([]) != RandomQueryAnalyst(5, 1, 7).next_query([])


def test_boosting_analyst_votes():
    boost = BoostingAnalyst(4, 2, 3)
    q0 = boost.next_query([])
    assert BoostingAnalyst(4, 2, 3).next_query([]) == q0
    assert boost.next_query([q0.mean() + 0.1]) == q0
    assert boost.next_query([q0.mean() - 0.1]) == StatQuery(1 - q0.table)
    assert boost.next_query([q0.mean()]) == StatQuery.constant(4, 0)
    with pytest.raises(ValueError):
        BoostingAnalyst(4, 1, 0)


def test_boosting_last_query_is_fitted():
    # answers taken from a fixed sample: the final query over-weights it
    rng = np.random.default_rng(0)
    sample = rng.integers(0, 64, 8).tolist()
    gaps = []
    for s in range(30):
        boost = BoostingAnalyst(6, 40, s)
        answers = []
        for _ in range(39):
            answers.append(boost.next_query(answers).empirical(sample))
        last = boost.next_query(answers)
        gaps.append(last.empirical(sample) - last.mean())
    assert np.mean(gaps) > 0.2


# ---------------------------------------------------------------------------
# stream adversaries
# ---------------------------------------------------------------------------


def test_probe_adversary_streaming():
    P = [1, 3, 5, 7, 9, 11]
    bot_id = 1 << PARAMS.d
    sample = [3, 9, bot_id]
    adv = MembershipProbeAdversary(PARAMS, SCHEME, P, seed=0, threshold=default_threshold(len(sample)))
    alg = ObliviousSada2(PARAMS, SCHEME.dec, sample=sample)
    truth = Sada2TruthEvaluator(PARAMS, SCHEME.dec)
    report = run_streaming_game(alg, adv, adv.max_length, truth, alpha=0.3)
    assert adv.sampled == {3, 9}
    assert adv.unsampled == [1, 5, 7, 11]
    assert adv.max_length == len(P) + 4 * len(set(P))
    assert adv.evasion_start == len(P) + 3 * 6 + 1
    assert report.per_step_output[-1] == 1 / 3
    g = report.per_step_truth[-1]
    assert g == float(Fraction(PARAMS.bot_count + 4, PARAMS.bot_count + 6))
    assert report.failed


def test_probe_adversary_full_sample_is_caught():
    # a sample containing every point: the attack learns all, evades nothing
    P = [2, 4, 6]
    sample = list(range((1 << PARAMS.d) + PARAMS.bot_count))
    adv = MembershipProbeAdversary(PARAMS, SCHEME, P, seed=1)
    report = run_streaming_game(
        ObliviousSada2(PARAMS, SCHEME.dec, sample=sample), adv, adv.max_length, Sada2TruthEvaluator(PARAMS, SCHEME.dec), alpha=0.3
    )
    assert adv.sampled == {2, 4, 6} and adv.unsampled == []
    assert not report.failed


def test_analyst_stream_matches_mechanism():
    for s in range(5):
        P = sample_database(s, 8, 4)
        ell = 4
        factory = lambda tape: Sada2TruthEvaluator(PARAMS, SCHEME.dec)  # noqa: E731
        adv = AnalystStreamAdversary(PARAMS, SCHEME, P, RandomQueryAnalyst(4, ell, s), ell, s)
        assert adv.length == 8 + ell * 16
        report = run_streaming_game(factory(None), adv, adv.length, factory(None))
        ends = [report.per_step_output[8 + 16 * j - 1] for j in range(1, ell + 1)]
        t = answer_queries2(P, RandomQueryAnalyst(4, ell, s), factory, SCHEME, PARAMS, s, ell)
        assert ends == t.answers


def test_scripted_adversary_repeats_past_end():
    adv = MembershipProbeAdversary(PARAMS, SCHEME, [1], seed=0, probes=[1])
    outs = []
    last = None
    for i in range(adv.max_length + 2):
        last = adv.next_update(outs)
        outs.append(0.5)
    assert adv.emitted == adv.max_length + 2
    assert last is not None


# ---------------------------------------------------------------------------
# config and reports
# ---------------------------------------------------------------------------


def test_attack_config_violations():
    assert AttackConfig(4).violations(4) == []
    assert AttackConfig(0).violations() == ["AttackConfig.probe_set_size must be a positive integer"]
    assert AttackConfig(17).violations(4) == ["AttackConfig.probe_set_size must not exceed 2^d"]
    assert AttackConfig(2, decision_threshold=0).violations()
    assert AttackConfig(2, target="other").violations()[0].startswith("AttackConfig.target")


def test_attack_report_record():
    rec = AttackReport(3, 5, 0.5, 0.25, True).record()
    assert rec == {"run_id": 3, "recovered": 5, "true_positive_rate": 0.5, "phase2_error": 0.25, "violated": True}
