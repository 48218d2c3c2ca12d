"""Trial functions for every experiment kind.

Each kind maps a flat parameter dict and a trial seed to one JSON-ready
record, and a list of such records to a summary.  Records always carry a
``failed`` flag (the per-trial event the kind is about) and a numeric
``metric``.  The runner handles files, seeding and parallelism.
"""

from __future__ import annotations

import math
from fractions import Fraction
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np

from .attacks import (
    AnalystStreamAdversary,
    BoostingAnalyst,
    MembershipProbeAdversary,
    MembershipProbeAnalyst,
    RandomQueryAnalyst,
    default_threshold,
)
from .bsm_prg import (
    BsmExperimentConfig,
    ConstantAdversary,
    FirstOutputAdversary,
    ForwardingAdversary,
    PrefixStoringAdversary,
    PrgParams,
    WholeBlockAdversary,
    run_ideal_experiment,
    run_real_experiment,
)
from .core_game import UniformDistribution, flip_number, run_streaming_game, statistical_error
from .crypto_box import AdversaryB, EncryptionScheme, run_semantic_game, sample_database
from .randomness import RandomTape, derive_rng, derive_seed
from .reductions import AnswerQueries, AnswerQueries2, answer_queries2, answer_queries2_natural, replay_transcript
from .core_game import run_accuracy_game
from .sada import ObliviousSada, SadaParams, SadaTruthEvaluator, filler_update, make_update, sada_sample_size
from .sada2 import DataUpdate, ObliviousSada2, Sada2Params, Sada2TruthEvaluator, sada2_sample_size


def next_pow2(x: int) -> int:
    return 1 << max(1, (x - 1).bit_length())


def _ci(p: float, n: int) -> float:
    return 1.96 * math.sqrt(p * (1 - p) / n) if n else 0.0


# ---------------------------------------------------------------------------
# parameter helpers
# ---------------------------------------------------------------------------


def sada2_params(cfg: dict[str, Any]) -> Sada2Params:
    """SADA2 parameters from ``d, gamma, n, rounds, kappa[, psi, m]``.

    ``m`` defaults to the smallest power of two that fits ``n`` data updates
    and ``rounds`` query rounds.
    """
    d, n, rounds = cfg["d"], cfg["n"], cfg["rounds"]
    kappa = cfg.get("kappa", 16)
    psi = cfg.get("psi", kappa + 1)
    m = cfg.get("m") or next_pow2(n + (rounds << d))
    return Sada2Params(d=d, m=m, kappa=kappa, psi=psi, gamma=cfg["gamma"])


def sada2_sample(cfg: dict[str, Any], params: Sada2Params) -> int:
    if cfg.get("sample_size"):
        return int(cfg["sample_size"])
    return sada2_sample_size(cfg["alpha"], params.gamma, params.m, cfg["beta"])


def sada_params(cfg: dict[str, Any]) -> tuple[SadaParams, PrgParams]:
    a, d, n = cfg["a"], cfg["d"], cfg["n"]
    m = cfg.get("m") or n + cfg["rounds"] * ((a + 1) << d)
    params = SadaParams(a=a, b=cfg["b"], d=d, m=m, n=n, gamma=cfg["gamma"])
    return params, PrgParams(a=a, b=cfg["b"], t=cfg["t"])


def _tape(seed: int) -> RandomTape:
    return RandomTape.from_seed(derive_seed(seed, "algorithm"))


def _max_rel_error(report) -> float:
    worst = 0.0
    for z, g in zip(report.per_step_output, report.per_step_truth):
        if g > 0:
            worst = max(worst, abs(z - g) / g)
        elif z != 0:
            worst = math.inf
    return worst


def _plain_summary(records: list[dict[str, Any]]) -> dict[str, Any]:
    n = len(records)
    fails = sum(1 for r in records if r["failed"])
    metrics = [r["metric"] for r in records]
    frac = fails / n if n else 0.0
    return {
        "trials": n,
        "failures": fails,
        "failure_fraction": frac,
        "failure_ci": _ci(frac, n),
        "mean_metric": float(np.mean(metrics)) if n else 0.0,
        "max_metric": float(np.max(metrics)) if n else 0.0,
    }


# ---------------------------------------------------------------------------
# oblivious accuracy and the adaptive attack
# ---------------------------------------------------------------------------


def _sada_fixed_stream(params: SadaParams, rng: np.random.Generator) -> list[int]:
    data = [make_update(int(p), int(k), params) for p, k in zip(rng.integers(0, 1 << params.d, params.n), rng.integers(0, 1 << params.b, params.n))]
    bits = rng.integers(0, 2, size=params.m - params.n)
    return data + [filler_update(int(b), params) for b in bits]


class _Replay:
    def __init__(self, updates: list) -> None:
        self.updates = updates

    def next_update(self, outputs):
        return self.updates[len(outputs)]


def oblivious_accuracy_trial(cfg: dict[str, Any], seed: int) -> dict[str, Any]:
    """Sampling algorithm against an oblivious stream; failure = any step outside ``(1 +- alpha) g``."""
    alpha = cfg["alpha"]
    if cfg.get("problem", "sada2") == "sada":
        params, prg = sada_params(cfg)
        s = cfg.get("sample_size") or sada_sample_size(alpha, params.gamma, params.m, cfg["beta"])
        stream = _sada_fixed_stream(params, derive_rng(seed, "stream"))
        alg = ObliviousSada(params, prg, s, _tape(seed))
        report = run_streaming_game(alg, _Replay(stream), len(stream), SadaTruthEvaluator(params, prg), alpha)
    else:
        params = sada2_params(cfg)
        scheme = EncryptionScheme(params.kappa, params.psi)
        s = sada2_sample(cfg, params)
        P = sample_database(seed, cfg["n"], params.d)
        adv = AnalystStreamAdversary(params, scheme, P, RandomQueryAnalyst(params.d, cfg["rounds"], seed), cfg["rounds"], seed)
        alg = ObliviousSada2(params, scheme.dec, s, _tape(seed))
        report = run_streaming_game(alg, adv, adv.length, Sada2TruthEvaluator(params, scheme.dec), alpha)
    rel = _max_rel_error(report)
    return {"sample_size": s, "steps": len(report.per_step_output), "peak_state_bits": report.peak_state_bits, "metric": rel, "failed": report.failed}


def adaptive_attack_trial(cfg: dict[str, Any], seed: int) -> dict[str, Any]:
    """Per-step membership probing; failure = the attack produced a step with ``|z - g| > ratio * g``."""
    params = sada2_params(cfg)
    scheme = EncryptionScheme(params.kappa, params.psi)
    s = sada2_sample(cfg, params)
    ratio = cfg.get("violation_ratio", 0.3)
    P = sample_database(seed, cfg["n"], params.d)
    adv = MembershipProbeAdversary(params, scheme, P, seed, threshold=cfg.get("threshold") or default_threshold(s))
    alg = ObliviousSada2(params, scheme.dec, s, _tape(seed))
    report = run_streaming_game(alg, adv, adv.max_length, Sada2TruthEvaluator(params, scheme.dec), cfg.get("alpha", 0.2))
    rel = [abs(z - g) / g for z, g in zip(report.per_step_output, report.per_step_truth)]
    present = set(P)
    truly = {p for p in alg.mult if p in present}
    tpr = len(adv.sampled & truly) / len(truly) if truly else 1.0
    return {
        "sample_size": s,
        "recovered": len(adv.sampled),
        "true_positive_rate": tpr,
        "exact_recovery": adv.sampled == truly,
        "phase2_error": rel[-1],
        "metric": max(rel),
        "failed": max(rel) > ratio,
    }


def separation_trial(cfg: dict[str, Any], seed: int) -> dict[str, Any]:
    """Oblivious and adaptive runs on the same parameters; failure = attack succeeded."""
    obl = oblivious_accuracy_trial(cfg, seed)
    att = adaptive_attack_trial(cfg, seed)
    return {
        "sample_size": att["sample_size"],
        "oblivious_failed": obl["failed"],
        "oblivious_error": obl["metric"],
        "attack_error": att["metric"],
        "exact_recovery": att["exact_recovery"],
        "metric": att["metric"],
        "failed": att["failed"],
    }


def _separation_summary(records: list[dict[str, Any]]) -> dict[str, Any]:
    out = _plain_summary(records)
    n = len(records)
    out["oblivious_failure_fraction"] = sum(r["oblivious_failed"] for r in records) / n if n else 0.0
    out["attack_success_fraction"] = out["failure_fraction"]
    return out


# ---------------------------------------------------------------------------
# PRG and semantic-security advantages
# ---------------------------------------------------------------------------


def _bsm_adversary(profile: str, prg: PrgParams, storage: int):
    if profile == "unbounded":
        return WholeBlockAdversary(prg)
    if profile == "forwarding":
        return ForwardingAdversary(prg)
    if profile == "prefix":
        return PrefixStoringAdversary(prg, storage)
    if profile == "first-output":
        return FirstOutputAdversary()
    if profile == "constant":
        return ConstantAdversary(0)
    raise ValueError(f"unknown adversary profile {profile!r}")


def bsm_setup(cfg: dict[str, Any]) -> tuple[PrgParams, BsmExperimentConfig]:
    prg = PrgParams(a=cfg["a"], b=cfg.get("b", 64), t=cfg["t"])
    storage = cfg["T"] * cfg["a"] if cfg["profile"] == "unbounded" else cfg.get("storage_bits", 0)
    return prg, BsmExperimentConfig(T=cfg["T"], storage_bits=storage, trials=max(100, cfg.get("trials", 100)), seed=0)


def prg_advantage_trial(cfg: dict[str, Any], seed: int) -> dict[str, Any]:
    """One real and one ideal run with independent seeds."""
    prg, bcfg = bsm_setup(cfg)
    adv = _bsm_adversary(cfg["profile"], prg, bcfg.storage_bits)
    real = run_real_experiment(adv, bcfg, prg, derive_seed(seed, "real"))
    ideal = run_ideal_experiment(adv, bcfg, prg, derive_seed(seed, "ideal"))
    return {"real": real, "ideal": ideal, "metric": real - ideal, "failed": False}


def _advantage_summary(records: list[dict[str, Any]], one: str, zero: str) -> dict[str, Any]:
    n = len(records)
    out = _plain_summary(records)
    if n:
        p1 = sum(r[one] for r in records) / n
        p0 = sum(r[zero] for r in records) / n
        out.update(
            {
                f"p_{one}": p1,
                f"p_{zero}": p0,
                "advantage": abs(p1 - p0),
                "ci_halfwidth": 1.96 * math.sqrt(p1 * (1 - p1) / n + p0 * (1 - p0) / n),
            }
        )
    return out


def _sada2_backend(cfg: dict[str, Any], params: Sada2Params, dec) -> Callable[[RandomTape], Any]:
    if cfg.get("backend", "oblivious") == "exact":
        return lambda tape: Sada2TruthEvaluator(params, dec)
    s = sada2_sample(cfg, params)
    return lambda tape: ObliviousSada2(params, dec, s, tape)


def _analyst_factory(cfg: dict[str, Any], params: Sada2Params, seed: int, ell: int, probes=None):
    kind = cfg.get("analyst", "random")
    d = params.d
    if kind == "random":
        return lambda: RandomQueryAnalyst(d, ell, seed)
    if kind == "boost":
        return lambda: BoostingAnalyst(d, ell, seed)
    if kind == "probe":
        pts = sorted(set(probes)) if probes is not None else list(range(min(ell - 1, 1 << d)))
        thr = cfg.get("threshold") or (default_threshold(sada2_sample(cfg, params)) if cfg.get("backend", "oblivious") != "exact" else 1e-9)
        return lambda: MembershipProbeAnalyst(d, pts, thr)
    raise ValueError(f"unknown analyst {kind!r}")


def _make_b(cfg: dict[str, Any], seed: int) -> AdversaryB:
    params = sada2_params(cfg)
    scheme = EncryptionScheme(params.kappa, params.psi)
    ell = cfg.get("ell") or cfg["rounds"]
    probes = sample_database(seed, cfg["n"], params.d)
    return AdversaryB(
        _sada2_backend(cfg, params, scheme.dec),
        _analyst_factory(cfg, params, seed, ell, probes),
        params,
        cfg["n"],
        cfg["alpha"],
        scheme,
        seed,
        ell,
    )


def semantic_game_trial(cfg: dict[str, Any], seed: int) -> dict[str, Any]:
    """Adversary B in both worlds with independent seeds."""
    params = sada2_params(cfg)
    scheme = EncryptionScheme(params.kappa, params.psi)
    outs = {}
    for world in (0, 1):
        s = derive_seed(seed, "world", world)
        outs[world] = run_semantic_game(_make_b(cfg, s), 1 << params.d, world, s, scheme)
    return {"world1": outs[1], "world0": outs[0], "metric": outs[1] - outs[0], "failed": False}


def world_equivalence_trial(cfg: dict[str, Any], seed: int) -> dict[str, Any]:
    """B's transcripts under a shared seed against direct reduction runs."""
    params = sada2_params(cfg)
    scheme = EncryptionScheme(params.kappa, params.psi)
    ell = cfg.get("ell") or cfg["rounds"]
    same = {}
    for world, direct in ((1, answer_queries2), (0, answer_queries2_natural)):
        b = _make_b(cfg, seed)
        run_semantic_game(b, 1 << params.d, world, seed, scheme)
        analyst = _analyst_factory(cfg, params, seed, ell, b.P)()
        t = direct(b.P, analyst, _sada2_backend(cfg, params, scheme.dec), scheme, params, seed, ell)
        same[world] = t.serialize() == b.transcript.serialize() and t.answers == b.transcript.answers
    ok = same[0] and same[1]
    return {"world1_equal": same[1], "world0_equal": same[0], "metric": float(not ok), "failed": not ok}


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


def reduction_equivalence_trial(cfg: dict[str, Any], seed: int) -> dict[str, Any]:
    """Exact backend versus the closed-form padded average on a random case."""
    rng = derive_rng(seed, "case")
    d = int(rng.integers(1, cfg["d_max"] + 1))
    n = int(rng.integers(1, cfg["n_max"] + 1))
    rounds = cfg.get("rounds", 2)
    P = [int(x) for x in rng.integers(0, 1 << d, size=n)]
    queries = [rng.integers(0, 2, size=1 << d, dtype=np.uint8) for _ in range(rounds)]
    analyst = _FixedAnalyst(queries)
    if cfg.get("problem", "sada2") == "sada":
        bot = int(rng.integers(1, n + 1))
        params, prg = sada_params({**cfg, "d": d, "n": n, "rounds": rounds, "gamma": bot / (n + bot)})
        t = run_accuracy_game(AnswerQueries(params, prg, lambda tape: SadaTruthEvaluator(params, prg), seed), analyst, P, rounds, d)
        expect = [(bot + sum(int(q[p]) for p in P)) / (n + bot) for q in queries]
    else:
        bot = int(rng.integers(1, (1 << d) + 1))
        gamma = bot / (1 << d)
        if gamma >= 1:
            bot, gamma = (1 << d) - 1 or 1, ((1 << d) - 1 or 1) / (1 << d)
        params = Sada2Params(d=d, m=next_pow2(n + (rounds << d)), kappa=cfg.get("kappa", 16), psi=cfg.get("kappa", 16) + 1, gamma=gamma)
        scheme = EncryptionScheme(params.kappa, params.psi)
        t = answer_queries2(P, analyst, lambda tape: Sada2TruthEvaluator(params, scheme.dec), scheme, params, seed, rounds)
        distinct = set(P)
        expect = [(bot + sum(int(q[p]) for p in distinct)) / (bot + len(distinct)) for q in queries]
    diff = max(abs(z - e) for z, e in zip(t.answers, expect))
    return {"d": d, "n": n, "metric": diff, "failed": diff > cfg.get("tolerance", 1e-12)}


class _FixedAnalyst:
    def __init__(self, tables) -> None:
        from .core_game import StatQuery

        self.queries = [StatQuery(t) for t in tables]

    def next_query(self, answers):
        return self.queries[len(answers)]


def compression_replay_trial(cfg: dict[str, Any], seed: int) -> dict[str, Any]:
    """Snapshot at the tape switch, replay the query phase, compare transcripts bit for bit."""
    P = sample_database(seed, cfg["n"], cfg["d"])
    ell = cfg["rounds"]
    if cfg.get("problem", "sada2") == "sada":
        params, prg = sada_params({**cfg, "gamma": cfg["gamma"]})
        if cfg.get("backend", "oblivious") == "exact":
            factory = lambda tape: SadaTruthEvaluator(params, prg)  # noqa: E731
            restore = lambda snap, tape: SadaTruthEvaluator.restore(snap, params, prg)  # noqa: E731
        else:
            s = cfg.get("sample_size") or 32
            factory = lambda tape: ObliviousSada(params, prg, s, tape)  # noqa: E731
            restore = lambda snap, tape: ObliviousSada.restore(snap, params, prg, s, tape)  # noqa: E731
        make = lambda: AnswerQueries(params, prg, factory, seed, record_snapshot=True)  # noqa: E731
    else:
        params = sada2_params(cfg)
        scheme = EncryptionScheme(params.kappa, params.psi)
        if cfg.get("backend", "oblivious") == "exact":
            factory = lambda tape: Sada2TruthEvaluator(params, scheme.dec)  # noqa: E731
            restore = lambda snap, tape: Sada2TruthEvaluator.restore(snap, params, scheme.dec)  # noqa: E731
        else:
            s = sada2_sample(cfg, params)
            factory = lambda tape: ObliviousSada2(params, scheme.dec, s, tape)  # noqa: E731
            restore = lambda snap, tape: ObliviousSada2.restore(snap, params, scheme.dec, s, tape)  # noqa: E731
        make = lambda: AnswerQueries2(params, scheme, factory, seed, record_snapshot=True)  # noqa: E731
    mech = make()
    t = run_accuracy_game(mech, BoostingAnalyst(cfg["d"], ell, seed), P, ell, cfg["d"])
    snap = mech.switch_snapshot
    replayed = replay_transcript(make(), snap, restore, BoostingAnalyst(cfg["d"], ell, seed), ell, P)
    ok = replayed.serialize() == t.serialize() and replayed.answers == t.answers
    return {"snapshot_bits": snap.nbits, "transcript_bits": 16 * len(t), "metric": float(snap.nbits), "failed": not ok}


def generalization_trial(cfg: dict[str, Any], seed: int) -> dict[str, Any]:
    """Exact-backend reduction with a boosting analyst; failure = statistical error above the bound."""
    params = sada2_params(cfg)
    scheme = EncryptionScheme(params.kappa, params.psi)
    ell = cfg["rounds"]
    P = sample_database(seed, cfg["n"], params.d)
    t = answer_queries2(P, BoostingAnalyst(params.d, ell, seed), lambda tape: Sada2TruthEvaluator(params, scheme.dec), scheme, params, seed, ell)
    err = statistical_error(t, UniformDistribution(params.d))
    return {"metric": err, "failed": err > cfg.get("bound", 0.25)}


# ---------------------------------------------------------------------------
# flip number and memory accounting
# ---------------------------------------------------------------------------


def flip_number_reference(values, alpha: float) -> int:
    """Brute-force flip count: recurse on the suffix starting at the first exit, in exact arithmetic."""
    vals = [Fraction(v) for v in values]
    factor = Fraction(1.0 + alpha)

    def exits(anchor: Fraction, v: Fraction) -> bool:
        if anchor == 0 or v == 0:
            return (anchor == 0) != (v == 0)
        return v * factor < anchor or v > anchor * factor

    count, start = 0, 0
    while True:
        nxt = next((j for j in range(start + 1, len(vals)) if exits(vals[start], vals[j])), None)
        if nxt is None:
            return count
        count, start = count + 1, nxt


def flip_number_audit_trial(cfg: dict[str, Any], seed: int) -> dict[str, Any]:
    """Random sequence versus the reference count, plus the bound on a SADA2 truth sequence."""
    rng = derive_rng(seed, "flip")
    length = int(rng.integers(0, cfg.get("max_length", 200) + 1))
    raw = rng.exponential(1.0, size=length)
    raw[rng.random(length) < 0.1] = 0.0
    alpha = cfg["alpha"]
    values = raw.tolist()
    match = flip_number(values, alpha) == flip_number_reference(values, alpha)

    params = sada2_params(cfg)
    scheme = EncryptionScheme(params.kappa, params.psi)
    P = sample_database(seed, cfg["n"], params.d)
    adv = AnalystStreamAdversary(params, scheme, P, RandomQueryAnalyst(params.d, cfg["rounds"], seed), cfg["rounds"], seed)
    truth = Sada2TruthEvaluator(params, scheme.dec)
    seq = _drive(truth, adv, adv.length)
    flips = flip_number(seq, alpha)
    bound = 2 * cfg["rounds"] + 2
    return {"oracle_match": match, "flips": flips, "bound": bound, "metric": flips, "failed": (not match) or flips > bound}


def _slope(xs, ys) -> float:
    return float(np.polyfit(np.asarray(xs, float), np.asarray(ys, float), 1)[0])


def _drive(alg, adv, length: int) -> list[float]:
    outputs: list[float] = []
    for _ in range(length):
        outputs.append(float(alg.process(adv.next_update(outputs))))
    return outputs


def _peak(alg, updates) -> int:
    peak = alg.state_bits()
    for u in updates:
        alg.process(u)
        peak = max(peak, alg.state_bits())
    return peak


def _peak_adaptive(alg, adv, length: int) -> int:
    peak = alg.state_bits()
    outputs: list[float] = []
    for _ in range(length):
        outputs.append(float(alg.process(adv.next_update(outputs))))
        peak = max(peak, alg.state_bits())
    return peak


def memory_accounting_trial(cfg: dict[str, Any], seed: int) -> dict[str, Any]:
    """Peak state of both sampling algorithms over a range of sample sizes, and of both exact evaluators."""
    sizes = cfg.get("sizes", [32, 64, 128, 256])
    tol = cfg.get("slope_tolerance", 0.2)
    rng = derive_rng(seed, "memory")
    out: dict[str, Any] = {"sizes": sizes}

    p2 = sada2_params({"d": cfg["d"], "gamma": cfg["gamma"], "n": cfg["n"], "rounds": cfg["rounds"], "kappa": cfg.get("kappa", 16)})
    scheme = EncryptionScheme(p2.kappa, p2.psi)
    P = sample_database(seed, cfg["n"], p2.d)
    peaks2 = []
    for s in sizes:
        adv = AnalystStreamAdversary(p2, scheme, P, RandomQueryAnalyst(p2.d, cfg["rounds"], seed), cfg["rounds"], seed)
        alg = ObliviousSada2(p2, scheme.dec, s, _tape(derive_seed(seed, s)))
        peaks2.append(_peak_adaptive(alg, adv, adv.length))
    rec2 = ObliviousSada2(p2, scheme.dec, sample=[0]).record_bits

    p1, prg = sada_params({"a": cfg["a"], "b": cfg["b"], "t": cfg["t"], "d": cfg["d"], "n": cfg["sada_n"], "gamma": cfg["sada_gamma"], "rounds": 1})
    stream = _sada_fixed_stream(p1, rng)
    peaks1 = []
    for s in sizes:
        if s >= p1.n + p1.bot_count:
            raise ValueError("memory sweep needs sample sizes below n + bot_count")
        peaks1.append(_peak(ObliviousSada(p1, prg, s, _tape(derive_seed(seed, "sada", s))), stream))
    rec1 = 1 + p1.d + p1.b

    counts = cfg.get("distinct", [16, 32, 64, 128])
    ev1, ev2 = [], []
    for c in counts:
        pts = rng.choice(1 << p1.d, size=c, replace=False).tolist()
        keys = rng.integers(0, 1 << p1.b, size=c).tolist()
        data = [make_update(pts[i % c], keys[i % c], p1) for i in range(p1.n)]
        ev = SadaTruthEvaluator(p1, prg)
        ev1.append(_peak(ev, data))
        ev2.append(_peak(Sada2TruthEvaluator(p2, scheme.dec), [DataUpdate(p, scheme.gen(rng)) for p in pts]))
    wn = max(1, p1.n.bit_length())
    rec_ev1 = p1.d + p1.b + wn
    rec_ev2 = 2 + p2.d + p2.kappa + p2.log_m + p2.psi

    slopes = {
        "oblivious_sada": (_slope(sizes, peaks1), rec1),
        "oblivious_sada2": (_slope(sizes, peaks2), rec2),
        "exact_sada": (_slope(counts, ev1), rec_ev1),
        "exact_sada2": (_slope(counts, ev2), rec_ev2),
    }
    worst = 0.0
    for name, (slope, rec) in slopes.items():
        out[f"{name}_slope"] = slope
        out[f"{name}_record_bits"] = rec
        worst = max(worst, abs(slope - rec) / rec)
    out.update({"peaks_sada": peaks1, "peaks_sada2": peaks2, "metric": worst, "failed": worst > tol})
    return out


@dataclass(frozen=True)
class Kind:
    trial: Callable[[dict[str, Any], int], dict[str, Any]]
    summarize: Callable[[list[dict[str, Any]]], dict[str, Any]]
    required: tuple[str, ...]


KINDS: dict[str, Kind] = {
    "oblivious-accuracy": Kind(oblivious_accuracy_trial, _plain_summary, ("d", "gamma", "n", "rounds", "alpha", "beta")),
    "adaptive-attack": Kind(adaptive_attack_trial, _plain_summary, ("d", "gamma", "n", "rounds", "alpha", "beta")),
    "separation": Kind(separation_trial, _separation_summary, ("d", "gamma", "n", "rounds", "alpha", "beta")),
    "prg-advantage": Kind(prg_advantage_trial, lambda r: _advantage_summary(r, "real", "ideal"), ("profile", "a", "t", "T")),
    "semantic-game": Kind(semantic_game_trial, lambda r: _advantage_summary(r, "world1", "world0"), ("d", "gamma", "n", "rounds", "alpha")),
    "world-equivalence": Kind(world_equivalence_trial, _plain_summary, ("d", "gamma", "n", "rounds", "alpha")),
    "reduction-equivalence": Kind(reduction_equivalence_trial, _plain_summary, ("d_max", "n_max")),
    "compression-replay": Kind(compression_replay_trial, _plain_summary, ("d", "gamma", "n", "rounds")),
    "generalization": Kind(generalization_trial, _plain_summary, ("d", "gamma", "n", "rounds")),
    "flip-number-audit": Kind(flip_number_audit_trial, _plain_summary, ("alpha", "d", "gamma", "n", "rounds")),
    "memory-accounting": Kind(memory_accounting_trial, _plain_summary, ("d", "gamma", "n", "rounds", "a", "b", "t", "sada_n", "sada_gamma")),
}
