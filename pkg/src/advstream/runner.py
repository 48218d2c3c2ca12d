"""Batch experiment driver: spec files, validation, seeded trials, result files.

A spec file is flat ``key = value`` text.  ``#`` starts a comment.  Values
are parsed as Python literals where possible (ints, floats, lists) and kept
as strings otherwise.  Reserved keys:

    kind     experiment kind, one of ``KINDS``
    trials   number of trials (default 1)
    seed     master seed (default 0)
    out      result path (default ``results/<kind>.jsonl``)

Every other key is a problem parameter.  Trial ``i`` runs with seed
``derive_seed(master, "trial", i)``, so results do not depend on ``--jobs``.

A result file is JSON lines: one ``spec`` record, one ``trial`` record per
trial, one ``summary`` record.  A CSV copy of the summary is written next to
it with the suffix ``.csv``.
"""

from __future__ import annotations

import ast
import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .bsm_prg import BsmExperimentConfig, PrgParams
from .experiments import KINDS, bsm_setup, sada2_params, sada_params
from .randomness import derive_seed

RESERVED = ("kind", "trials", "seed", "out")


class SpecError(ValueError):
    """Invalid experiment spec; ``violations`` lists every problem found."""

    def __init__(self, violations: list[str]) -> None:
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass
class ExperimentSpec:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)
    trials: int = 1
    seed: int = 0
    out: str | None = None

    @property
    def out_path(self) -> Path:
        return Path(self.out or f"results/{self.kind}.jsonl")

    def to_record(self) -> dict[str, Any]:
        return {"type": "spec", "kind": self.kind, "trials": self.trials, "seed": self.seed, "params": self.params}


def _parse_value(text: str) -> Any:
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_spec(text: str) -> ExperimentSpec:
    raw: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError([f"line {lineno}: expected 'key = value'"])
        key, value = (s.strip() for s in line.split("=", 1))
        raw[key] = _parse_value(value)
    if "kind" not in raw:
        raise SpecError(["spec has no 'kind' key"])
    params = {k: v for k, v in raw.items() if k not in RESERVED}
    return ExperimentSpec(str(raw["kind"]), params, int(raw.get("trials", 1)), int(raw.get("seed", 0)), raw.get("out"))


def load_spec(path: str | Path) -> ExperimentSpec:
    return parse_spec(Path(path).read_text())


def validate_params(obj: Any) -> list[str]:
    """Violations reported by any params object with a ``violations`` method."""
    check = getattr(obj, "violations", None)
    if check is None:
        return [f"{type(obj).__name__} has no validator"]
    return list(check())


def _unit_interval(cfg: dict[str, Any], *keys: str) -> list[str]:
    return [f"{k} must lie in (0, 1)" for k in keys if k in cfg and not 0 < cfg[k] < 1]


def validate_spec(spec: ExperimentSpec) -> list[str]:
    """Every violated invariant of ``spec``; empty when it may run."""
    out: list[str] = []
    if spec.kind not in KINDS:
        return [f"kind must be one of {', '.join(KINDS)}"]
    if spec.trials < 0:
        out.append("trials must be a nonnegative integer")
    if not 0 <= spec.seed < 1 << 64:
        out.append("seed must be a 64-bit unsigned integer")
    cfg = spec.params
    missing = [k for k in KINDS[spec.kind].required if k not in cfg]
    if missing:
        return out + [f"missing parameter {k!r}" for k in missing]
    out += _unit_interval(cfg, "alpha", "beta")
    try:
        if spec.kind == "prg-advantage":
            prg, bcfg = bsm_setup(cfg)
            out += validate_params(prg)
            if not out:
                out += bcfg.violations(prg, cfg["profile"])
        elif spec.kind == "reduction-equivalence":
            if cfg["d_max"] < 1 or cfg["n_max"] < 1:
                out.append("d_max and n_max must be positive integers")
            if cfg.get("problem") == "sada":
                for key in ("a", "b", "t"):
                    if key not in cfg:
                        out.append(f"missing parameter {key!r}")
        elif cfg.get("problem") == "sada":
            params, prg = sada_params(cfg)
            out += validate_params(params) + validate_params(prg)
        else:
            params2 = sada2_params(cfg)
            out += validate_params(params2)
            if not out and (cfg["rounds"] << params2.d) + cfg["n"] > params2.m:
                out.append(f"n + rounds * 2^d exceeds m = {params2.m}")
            if spec.kind == "memory-accounting":
                p1, prg = sada_params({**cfg, "n": cfg["sada_n"], "gamma": cfg["sada_gamma"], "rounds": 1})
                out += validate_params(p1) + validate_params(prg)
    except (KeyError, TypeError, ValueError) as exc:
        out.append(f"invalid parameters: {exc}")
    return out


def trial_seed(master: int, i: int) -> int:
    return derive_seed(master, "trial", i)


def _run_one(args: tuple[str, dict[str, Any], int, int]) -> dict[str, Any]:
    kind, cfg, master, i = args
    record = KINDS[kind].trial(cfg, trial_seed(master, i))
    return {"type": "trial", "index": i, **record}


def _clean(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item"):
        return _clean(value.item())
    return value


def _dumps(record: dict[str, Any]) -> str:
    return json.dumps(_clean(record), sort_keys=True)


def run_trials(spec: ExperimentSpec, jobs: int = 1) -> tuple[list[dict[str, Any]], dict[str, Any]]:
    violations = validate_spec(spec)
    if violations:
        raise SpecError(violations)
    args = [(spec.kind, spec.params, spec.seed, i) for i in range(spec.trials)]
    if jobs > 1 and spec.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_one, args))
    else:
        records = [_run_one(a) for a in args]
    summary = {"type": "summary", "kind": spec.kind, **KINDS[spec.kind].summarize(records)}
    return records, summary


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> Path:
    """Run every trial of ``spec`` and write the result file; returns its path."""
    records, summary = run_trials(spec, jobs)
    path = spec.out_path
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [_dumps(spec.to_record())] + [_dumps(r) for r in records] + [_dumps(summary)]
    path.write_text("\n".join(lines) + "\n")
    path.with_suffix(".csv").write_text(summary_csv(summary))
    return path


def summary_csv(summary: dict[str, Any]) -> str:
    flat = {k: v for k, v in _clean(summary).items() if not isinstance(v, (list, dict))}
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=sorted(flat), lineterminator="\n")
    writer.writeheader()
    writer.writerow(flat)
    return buf.getvalue()


def read_results(path: str | Path) -> tuple[ExperimentSpec, list[dict[str, Any]], dict[str, Any]]:
    spec_rec, trials, summary = None, [], None
    for line in Path(path).read_text().splitlines():
        rec = json.loads(line)
        if rec["type"] == "spec":
            spec_rec = rec
        elif rec["type"] == "trial":
            trials.append(rec)
        elif rec["type"] == "summary":
            summary = rec
    if spec_rec is None or summary is None:
        raise ValueError(f"{path} is not a complete result file")
    spec = ExperimentSpec(spec_rec["kind"], spec_rec["params"], spec_rec["trials"], spec_rec["seed"], str(path))
    return spec, trials, summary


__all__ = [
    "BsmExperimentConfig",
    "ExperimentSpec",
    "PrgParams",
    "SpecError",
    "load_spec",
    "parse_spec",
    "read_results",
    "run_experiment",
    "run_trials",
    "summary_csv",
    "trial_seed",
    "validate_params",
    "validate_spec",
]
