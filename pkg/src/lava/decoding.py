"""Inference strategies for a trained NAT model.

All strategies fix the target length before reading out tokens; NPD is the
only one that tries several lengths.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as T
from .data import BOS, EOS, PAD, pad_sequences
from .nat import LAOutput, NATModel
from .teacher import TeacherModel

STRATEGIES = ("greedy", "npd", "link-rescore", "sequential", "dynamic")


@dataclass
class DecodeResult:
    tokens: list[int]
    token_probs: list[float]
    strategy: str
    triples: list[tuple] = field(default_factory=list)
    refinement_trace: list[tuple[int, list[int]]] = field(default_factory=list)
    latency_ms: float = 0.0
    candidates_scored: int = 0
    score: float | None = None  # teacher log-prob of the winner, when rescored
    candidates: list[list[int]] = field(default_factory=list)
    candidate_scores: list[float] = field(default_factory=list)


# never content tokens, so never emitted at a target position
NON_CONTENT = (PAD, BOS, EOS)


def content_dist(logits: np.ndarray) -> np.ndarray:
    """Current-token probabilities with the non-content ids zeroed (not renormalised)."""
    dist = T.softmax_np(logits)
    dist[..., list(NON_CONTENT)] = 0.0
    return dist


def _check_source(x: Sequence[int]) -> list[int]:
    x = [int(t) for t in x]
    if not x:
        raise ValueError("source must be non-empty")
    return x


def _triples(la: LAOutput, row: int, m: int) -> list[tuple]:
    """Per-position ``(left, current, right)`` argmax ids with their probabilities."""
    cur = content_dist(la.current_logits.data[row, :m])
    left = la.left_dist[row, :m] if la.left_logits is not None else None
    right = la.right_dist[row, :m] if la.right_logits is not None else None
    out = []
    for i in range(m):
        entry = []
        for dist in (left, cur, right):
            if dist is None:
                entry.append((None, None))
            else:
                k = int(np.argmax(dist[i]))
                entry.append((k, float(dist[i, k])))
        out.append(tuple(entry))
    return out


def _argmax_tokens(la: LAOutput, row: int, m: int) -> tuple[list[int], list[float]]:
    dist = content_dist(la.current_logits.data[row, :m])
    ids = np.argmax(dist, axis=-1)
    return [int(t) for t in ids], [float(dist[i, t]) for i, t in enumerate(ids)]


def greedy_decode(model: NATModel, x: Sequence[int], length: int | None = None) -> DecodeResult:
    """One parallel pass; each position takes the argmax of its current-token distribution."""
    x = _check_source(x)
    t0 = time.perf_counter()
    model.eval()
    with T.no_grad():
        out = model.forward(x, length)
    m = int(out.lengths[0])
    tokens, probs = _argmax_tokens(out.la, 0, m)
    res = DecodeResult(tokens, probs, "greedy", triples=_triples(out.la, 0, m))
    res.latency_ms = (time.perf_counter() - t0) * 1e3
    return res


def length_offsets(count: int):
    """0, +1, -1, +2, -2, ... (``count`` values)."""
    out, k = [0], 1
    while len(out) < count:
        out.append(k)
        if len(out) < count:
            out.append(-k)
        k += 1
    return out[:count]


def _rescore(teacher: TeacherModel, x: list[int], candidates: list[list[int]]):
    if teacher is None:
        raise ValueError("rescoring needs a teacher model")
    teacher.eval()
    scores = teacher.score_batch(x, candidates)
    best = int(np.argmax(scores))
    return best, scores


def npd_decode(model: NATModel, teacher: TeacherModel, x: Sequence[int],
               num_candidates: int = 10) -> DecodeResult:
    """Greedy-decode several lengths around the predicted one in a single batch and
    keep the candidate the teacher likes best (unnormalised log-probability)."""
    if num_candidates < 1:
        raise ValueError("num_candidates must be >= 1")
    if teacher is None:
        raise ValueError("NPD needs a teacher model")
    x = _check_source(x)
    t0 = time.perf_counter()
    model.eval()
    limit = min(model.cfg.max_len, teacher.cfg.max_len - 1)
    with T.no_grad():
        enc = model.encode(np.asarray([x]))
        m = int(model.predicted_lengths(enc)[0])
        lengths: list[int] = []
        # widen the offset list until enough in-range lengths survive
        span = num_candidates
        while len(lengths) < num_candidates and span <= 4 * limit + num_candidates:
            lengths = [m + o for o in length_offsets(span) if 1 <= m + o <= limit][:num_candidates]
            span += 2
        la, _ = model.forward_lengths(x, lengths, enc)
    candidates, probs = zip(*(_argmax_tokens(la, r, n) for r, n in enumerate(lengths)))
    best, scores = _rescore(teacher, x, list(candidates))
    res = DecodeResult(list(candidates[best]), list(probs[best]), "npd",
                       triples=_triples(la, best, lengths[best]),
                       candidates_scored=len(candidates), score=float(scores[best]),
                       candidates=[list(c) for c in candidates],
                       candidate_scores=[float(v) for v in scores])
    res.latency_ms = (time.perf_counter() - t0) * 1e3
    return res


def link_candidates(la: LAOutput, m: int, row: int = 0) -> list[list[int]]:
    """Candidate set per position: right guess of i-1, own guess, left guess of i+1."""
    cur = np.argmax(content_dist(la.current_logits.data[row, :m]), axis=-1)
    left = np.argmax(la.left_logits.data[row, :m], axis=-1)
    right = np.argmax(la.right_logits.data[row, :m], axis=-1)
    sets = []
    for i in range(m):
        cand = [int(cur[i])]
        if i > 0:
            cand.append(int(right[i - 1]))
        if i < m - 1:
            cand.append(int(left[i + 1]))
        # neighbour heads may guess a boundary marker; those never fill a slot
        sets.append(sorted({c for c in cand if c not in NON_CONTENT} or {int(cur[i])}))
    return sets


def link_rescore_decode(model: NATModel, teacher: TeacherModel, x: Sequence[int],
                        num_samples: int = 10, seed: int = 0) -> DecodeResult:
    if not (model.cfg.ls and model.cfg.rs):
        raise ValueError("link-and-rescore needs LS=RS=1")
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    if teacher is None:
        raise ValueError("link-and-rescore needs a teacher model")
    x = _check_source(x)
    t0 = time.perf_counter()
    model.eval()
    with T.no_grad():
        out = model.forward(x)
    m = int(out.lengths[0])
    sets = link_candidates(out.la, m)
    rng = np.random.default_rng(seed)
    samples = [[s[int(rng.integers(len(s)))] for s in sets] for _ in range(num_samples)]
    best, scores = _rescore(teacher, x, samples)
    dist = content_dist(out.la.current_logits.data[0])
    tokens = samples[best]
    res = DecodeResult(tokens, [float(dist[i, t]) for i, t in enumerate(tokens)], "link-rescore",
                       triples=_triples(out.la, 0, m), candidates_scored=num_samples,
                       score=float(scores[best]), candidates=samples,
                       candidate_scores=[float(v) for v in scores])
    res.latency_ms = (time.perf_counter() - t0) * 1e3
    return res


def sequential_decode(model: NATModel, x: Sequence[int], direction: str = "L2R",
                      beam_width: int = 1) -> DecodeResult:
    """Fill positions one at a time, feeding the previously emitted token as a neighbour.

    The decoder stack runs once; only the look-around readout is repeated.
    Hypotheses are ranked by summed log-probability (length is fixed).
    """
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    if direction not in ("L2R", "R2L"):
        raise ValueError("direction must be L2R or R2L")
    cfg = model.cfg
    if (direction == "L2R" and not cfg.ls) or (direction == "R2L" and not cfg.rs):
        raise ValueError(f"{direction} decoding needs the matching look-around side")
    x = _check_source(x)
    t0 = time.perf_counter()
    model.eval()
    with T.no_grad():
        out = model.forward(x)
        m = int(out.lengths[0])
        z = out.trace.z
        width = z.shape[1]
        guess_left = (np.argmax(out.la.left_logits.data, axis=-1)
                      if out.la.left_logits is not None else np.full((1, width), BOS))
        guess_right = (np.argmax(out.la.right_logits.data, axis=-1)
                       if out.la.right_logits is not None else np.full((1, width), EOS))
        order = range(m) if direction == "L2R" else range(m - 1, -1, -1)
        beams: list[tuple[float, dict[int, int], list[float]]] = [(0.0, {}, [])]
        for i in order:
            k = len(beams)
            left = np.repeat(guess_left, k, axis=0)
            right = np.repeat(guess_right, k, axis=0)
            for b, (_, toks, _) in enumerate(beams):
                if direction == "L2R":
                    left[b, i] = toks.get(i - 1, BOS)
                else:
                    right[b, i] = toks.get(i + 1, EOS)
            zk = T.Tensor(np.repeat(z.data, k, axis=0))
            la = model.look_around_readout(zk, [m] * k, "infer", neighbor_ids=(left, right))
            logp = T.log_softmax_np(la.current_logits.data[:, i])
            logp[:, list(NON_CONTENT)] = -np.inf
            cand = []
            for b, (score, toks, probs) in enumerate(beams):
                for tok in np.argsort(-logp[b], kind="stable")[:beam_width]:
                    cand.append((score + float(logp[b, tok]), b, int(tok)))
            cand.sort(key=lambda c: -c[0])
            new = []
            for score, b, tok in cand[:beam_width]:
                toks = dict(beams[b][1])
                toks[i] = tok
                new.append((score, toks, beams[b][2] + [float(np.exp(logp[b, tok]))]))
            beams = new
    score, toks, probs = beams[0]
    if direction == "R2L":
        probs = probs[::-1]
    res = DecodeResult([toks[i] for i in range(m)], probs, f"sequential-{direction}",
                       triples=_triples(out.la, 0, m), score=score)
    res.latency_ms = (time.perf_counter() - t0) * 1e3
    return res


def refine_neighbors(tokens: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Left/right neighbour ids of a (1, m) sequence with BOS/EOS at the edges."""
    left = np.concatenate([[BOS], tokens[0, :-1]])[None, :]
    right = np.concatenate([tokens[0, 1:], [EOS]])[None, :]
    return left, right


def dynamic_decode(model: NATModel, x: Sequence[int], threshold: float = 0.5,
                   max_rounds: int = 4) -> DecodeResult:
    """Greedy pass, then re-predict low-confidence positions from their current neighbours.

    Each round is one readout sweep fed with the sequence as it stood before
    the round: positions below ``threshold`` that were never re-predicted take
    the new argmax, every other position has its confidence refreshed under
    its actual neighbours. A position is re-predicted at most once.
    """
    if not 0.0 <= threshold < 1.0:
        raise ValueError("threshold must lie in [0, 1)")
    if max_rounds < 0:
        raise ValueError("max_rounds must be >= 0")
    x = _check_source(x)
    t0 = time.perf_counter()
    model.eval()
    with T.no_grad():
        out = model.forward(x)
        m = int(out.lengths[0])
        dist = content_dist(out.la.current_logits.data[0, :m])
        tokens = np.argmax(dist, axis=-1)[None, :]
        probs = dist[np.arange(m), tokens[0]]
        done = np.zeros(m, dtype=bool)
        trace = []
        for r in range(1, max_rounds + 1):
            redo = np.flatnonzero((probs < threshold) & ~done)
            if redo.size == 0:
                break
            la = model.look_around_readout(out.trace.z, [m], "infer",
                                           neighbor_ids=refine_neighbors(tokens))
            new_dist = content_dist(la.current_logits.data[0, :m])
            tokens = tokens.copy()
            tokens[0, redo] = np.argmax(new_dist[redo], axis=-1)
            probs = new_dist[np.arange(m), tokens[0]]
            done[redo] = True
            trace.append((r, [int(i) for i in redo]))
    res = DecodeResult([int(t) for t in tokens[0]], [float(p) for p in probs], "dynamic",
                       triples=_triples(out.la, 0, m), refinement_trace=trace)
    res.latency_ms = (time.perf_counter() - t0) * 1e3
    return res


def decode(model: NATModel, x: Sequence[int], strategy: str = "greedy",
           teacher: TeacherModel | None = None, *, num_candidates: int = 10,
           num_samples: int = 10, seed: int = 0, direction: str = "L2R",
           beam_width: int = 1, threshold: float = 0.5, max_rounds: int = 4) -> DecodeResult:
    if strategy == "greedy":
        return greedy_decode(model, x)
    if strategy == "npd":
        return npd_decode(model, teacher, x, num_candidates)
    if strategy == "link-rescore":
        return link_rescore_decode(model, teacher, x, num_samples, seed)
    if strategy == "sequential":
        return sequential_decode(model, x, direction, beam_width)
    if strategy == "dynamic":
        return dynamic_decode(model, x, threshold, max_rounds)
    raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")


def decode_corpus(model: NATModel, sources: Sequence[Sequence[int]], strategy: str = "greedy",
                  teacher: TeacherModel | None = None, **kw) -> list[DecodeResult]:
    return [decode(model, x, strategy, teacher, **kw) for x in sources]


def greedy_decode_batch(model: NATModel, sources: Sequence[Sequence[int]],
                        batch_size: int = 128) -> list[list[int]]:
    """Batched greedy decoding at predicted lengths (for evaluation, not latency)."""
    model.eval()
    out: list[list[int]] = []
    with T.no_grad():
        for s in range(0, len(sources), batch_size):
            src, mask = pad_sequences(sources[s:s + batch_size])
            enc = model.encode(src, mask)
            lengths = model.predicted_lengths(enc)
            _, la, _ = model.run(enc, lengths, "infer")
            ids = np.argmax(content_dist(la.current_logits.data), axis=-1)
            out.extend([int(t) for t in ids[r, :n]] for r, n in enumerate(lengths))
    return out
