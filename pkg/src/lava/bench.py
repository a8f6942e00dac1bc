"""Batch-size-one latency benchmark against the autoregressive beam baseline."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import decoding
from .metrics import bleu, repeated_token_rate
from .nat import NATModel
from .teacher import TeacherModel

BENCH_STRATEGIES = ("greedy", "npd", "link-rescore", "sequential", "dynamic", "at-beam", "at-greedy")
BASELINE = "at-beam"


@dataclass
class StrategyStats:
    latency_ms: float
    speedup: float | None = None
    bleu: float | None = None
    repeat_rate: float = 0.0
    candidates_scored: float = 0.0
    decoder_forwards: float = 0.0  # per sentence
    readout_sweeps: float = 0.0
    at_steps: float = 0.0


@dataclass
class BenchReport:
    strategies: dict[str, StrategyStats] = field(default_factory=dict)
    n_sentences: int = 0
    mean_source_length: float = 0.0
    warmup: int = 5

    def to_dict(self) -> dict:
        return asdict(self)

    def latency(self, name: str) -> float:
        return self.strategies[name].latency_ms


def _runner(name: str, model: NATModel, teacher: TeacherModel | None, opts: dict):
    if name == "at-beam":
        if teacher is None:
            raise ValueError("at-beam needs a teacher")
        width = opts.get("at_beam", 4)
        return lambda x: teacher.beam_decode(x, width)[0]
    if name == "at-greedy":
        if teacher is None:
            raise ValueError("at-greedy needs a teacher")
        return teacher.greedy_decode
    if name not in decoding.STRATEGIES:
        raise ValueError(f"unknown strategy {name!r}; choose from {BENCH_STRATEGIES}")
    keys = ("num_candidates", "num_samples", "seed", "direction", "beam_width", "threshold",
            "max_rounds")
    kw = {k: opts[k] for k in keys if k in opts}

    def run(x):
        return decoding.decode(model, x, name, teacher, **kw)
    return run


def latency_bench(model: NATModel, teacher: TeacherModel | None, strategies: Sequence[str],
                  sources: Sequence[Sequence[int]],
                  references: Sequence[Sequence[int]] | None = None,
                  warmup: int = 5, **opts) -> BenchReport:
    """Mean wall-clock milliseconds per sentence, one sentence at a time, one BLAS thread.

    The first ``warmup`` sources are decoded once per strategy before timing
    and excluded from the averages.
    """
    if warmup < 5:
        raise ValueError("at least 5 warmup decodes are required")
    if not sources:
        raise ValueError("empty test set")
    model.eval()
    if teacher is not None:
        teacher.eval()
    report = BenchReport(n_sentences=len(sources),
                         mean_source_length=float(np.mean([len(x) for x in sources])),
                         warmup=warmup)
    with threadpool_limits(limits=1):
        for name in strategies:
            run = _runner(name, model, teacher, opts)
            for x in sources[:warmup]:
                run(x)
            counters_before = (dict(model.counters),
                               dict(teacher.counters) if teacher is not None else {})
            outputs, scored = [], 0
            start = time.perf_counter()
            for x in sources:
                out = run(x)
                if isinstance(out, decoding.DecodeResult):
                    scored += out.candidates_scored
                    out = out.tokens
                outputs.append(list(out))
            elapsed = time.perf_counter() - start
            n = len(sources)
            nat_before, at_before = counters_before
            stats = StrategyStats(
                latency_ms=1e3 * elapsed / n,
                repeat_rate=repeated_token_rate(outputs),
                candidates_scored=scored / n,
                decoder_forwards=(model.counters["decoder_forward"]
                                  - nat_before.get("decoder_forward", 0)) / n,
                readout_sweeps=(model.counters["readout_sweeps"]
                                - nat_before.get("readout_sweeps", 0)) / n,
                at_steps=((teacher.counters["step_readouts"] - at_before.get("step_readouts", 0)) / n
                          if teacher is not None else 0.0),
            )
            if references is not None:
                stats.bleu = bleu(outputs, references)
            report.strategies[name] = stats
    if BASELINE in report.strategies:
        base = report.strategies[BASELINE].latency_ms
        for s in report.strategies.values():
            s.speedup = base / s.latency_ms
    return report
