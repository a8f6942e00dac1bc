"""Corpus BLEU and the repeated-token rate."""

from __future__ import annotations

import math
from collections import Counter
from typing import Hashable, Sequence


def _ngrams(tokens: Sequence[Hashable], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(hypotheses: Sequence[Sequence[Hashable]], references: Sequence[Sequence[Hashable]],
         max_ngram: int = 4, lowercase: bool = False) -> float:
    """Unsmoothed corpus-level BLEU in [0, 100] with one reference per hypothesis."""
    if len(hypotheses) != len(references):
        raise ValueError("hypothesis and reference counts differ")
    if not references:
        raise ValueError("no references given")
    matches = [0] * max_ngram
    totals = [0] * max_ngram
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        if len(ref) == 0:
            raise ValueError("empty reference")
        if lowercase:
            hyp = [str(t).lower() for t in hyp]
            ref = [str(t).lower() for t in ref]
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_ngram + 1):
            h, r = _ngrams(hyp, n), _ngrams(ref, n)
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)
    if hyp_len == 0 or min(matches) == 0:
        return 0.0
    log_prec = sum(math.log(m / t) for m, t in zip(matches, totals)) / max_ngram
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_prec)


def repeated_token_rate(sequences: Sequence[Sequence[Hashable]]) -> float:
    """Fraction of adjacent position pairs carrying the same token, over a corpus."""
    if len(sequences) == 0:
        raise ValueError("no sequences given")
    repeats = pairs = 0
    for seq in sequences:
        for a, b in zip(seq[:-1], seq[1:]):
            pairs += 1
            repeats += a == b
    return repeats / pairs if pairs else 0.0


def exact_match(hypotheses, references) -> float:
    return sum(list(h) == list(r) for h, r in zip(hypotheses, references)) / max(len(references), 1)
