"""Vocabulary, parallel corpora, synthetic translation tasks and batching."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIAL_TOKENS = ("<pad>", "<bos>", "<eos>", "<unk>")
N_SPECIAL = len(SPECIAL_TOKENS)

TASKS = ("copy", "reverse", "remap", "multimodal")


class Vocabulary:
    """Token <-> id map with PAD/BOS/EOS/UNK pinned to ids 0-3."""

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        clash = set(tokens) & set(SPECIAL_TOKENS)
        if clash:
            raise ValueError(f"regular tokens collide with specials: {sorted(clash)}")
        self.id_to_token = list(SPECIAL_TOKENS) + tokens
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self) < N_SPECIAL + 1:
            raise ValueError("vocabulary needs at least one regular token")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.id_to_token == other.id_to_token

    @property
    def regular_tokens(self) -> list[str]:
        return self.id_to_token[N_SPECIAL:]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.token_to_id.get(t, UNK) for t in tokens]

    def decode(self, ids: Iterable[int], strip_special: bool = False) -> list[str]:
        out = []
        for i in ids:
            i = int(i)
            if strip_special and i < N_SPECIAL:
                continue
            out.append(self.id_to_token[i])
        return out

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self.regular_tokens), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Vocabulary:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls([ln for ln in lines if ln])


def build_vocab(corpus: Iterable[str], min_count: int = 1) -> Vocabulary:
    """Ids by descending frequency, ties broken lexicographically."""
    counts = Counter(corpus)
    if not counts:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    for s in SPECIAL_TOKENS:
        counts.pop(s, None)
    kept = [(tok, c) for tok, c in counts.items() if c >= min_count]
    kept.sort(key=lambda tc: (-tc[1], tc[0]))
    return Vocabulary([tok for tok, _ in kept])


def synthetic_vocab(vocab_size: int) -> Vocabulary:
    """Vocabulary whose regular token for id ``i`` is ``w{i}``."""
    return Vocabulary([f"w{i}" for i in range(N_SPECIAL, vocab_size)])


@dataclass(frozen=True)
class SentencePair:
    source: tuple[int, ...]
    target: tuple[int, ...]


@dataclass
class Batch:
    source: np.ndarray
    target: np.ndarray
    source_mask: np.ndarray
    target_mask: np.ndarray

    @property
    def source_lengths(self) -> np.ndarray:
        return self.source_mask.sum(axis=1)

    @property
    def target_lengths(self) -> np.ndarray:
        return self.target_mask.sum(axis=1)

    def __len__(self) -> int:
        return self.source.shape[0]


def remap_table(vocab_size: int, mapping_seed: int = 0) -> np.ndarray:
    """Fixed bijection over regular ids; specials map to themselves."""
    table = np.arange(vocab_size)
    rng = np.random.default_rng(mapping_seed)
    table[N_SPECIAL:] = N_SPECIAL + rng.permutation(vocab_size - N_SPECIAL)
    return table


def multimodal_targets(source: Sequence[int], table: np.ndarray) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """The two valid targets of a source: remapped, and remapped with the first two tokens swapped."""
    a = [int(table[t]) for t in source]
    b = list(a)
    b[0], b[1] = b[1], b[0]
    return tuple(a), tuple(b)


def gen_synthetic(
    task: str,
    n_pairs: int,
    len_range: tuple[int, int],
    vocab_size: int,
    seed: int,
    max_len: int = 64,
    mapping_seed: int = 0,
) -> list[SentencePair]:
    """Generate a toy parallel corpus over ids ``[4, vocab_size)``.

    ``multimodal`` draws sources from a pool of ``n_pairs // 4`` distinct
    sentences so each source recurs; every occurrence picks one of its two
    targets uniformly at random.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; choose from {TASKS}")
    if vocab_size < 8:
        raise ValueError("vocab_size must be at least 8")
    lo, hi = len_range
    if not 1 <= lo <= hi <= max_len:
        raise ValueError(f"invalid length range {len_range} for max_len {max_len}")
    if task == "multimodal" and lo < 2:
        raise ValueError("multimodal task needs sources of length >= 2")
    if n_pairs < 1:
        raise ValueError("n_pairs must be positive")

    rng = np.random.default_rng(seed)
    table = remap_table(vocab_size, mapping_seed)

    def draw_source() -> tuple[int, ...]:
        n = int(rng.integers(lo, hi + 1))
        return tuple(int(t) for t in rng.integers(N_SPECIAL, vocab_size, size=n))

    pairs = []
    if task == "multimodal":
        pool = []
        while len(pool) < max(1, n_pairs // 4):
            src = draw_source()
            if src[0] != src[1]:
                pool.append(src)
        for _ in range(n_pairs):
            src = pool[int(rng.integers(len(pool)))]
            targets = multimodal_targets(src, table)
            pairs.append(SentencePair(src, targets[int(rng.integers(2))]))
        return pairs

    for _ in range(n_pairs):
        src = draw_source()
        if task == "copy":
            tgt = src
        elif task == "reverse":
            tgt = src[::-1]
        else:
            tgt = tuple(int(table[t]) for t in src)
        pairs.append(SentencePair(src, tgt))
    return pairs


def batchify(pairs: Sequence[SentencePair], batch_size: int, seed: int | None = None) -> list[Batch]:
    """PAD-filled batches; shuffled with ``seed`` when given, else in corpus order."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = np.arange(len(pairs))
    if seed is not None:
        order = np.random.default_rng(seed).permutation(len(pairs))
    batches = []
    for start in range(0, len(order), batch_size):
        chunk = [pairs[i] for i in order[start:start + batch_size]]
        batches.append(make_batch([p.source for p in chunk], [p.target for p in chunk]))
    return batches


def pad_sequences(seqs: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(s) for s in seqs)
    mat = np.full((len(seqs), width), PAD, dtype=np.int64)
    mask = np.zeros((len(seqs), width), dtype=bool)
    for i, s in enumerate(seqs):
        mat[i, :len(s)] = s
        mask[i, :len(s)] = True
    return mat, mask


def make_batch(sources: Sequence[Sequence[int]], targets: Sequence[Sequence[int]]) -> Batch:
    src, src_mask = pad_sequences(sources)
    tgt, tgt_mask = pad_sequences(targets)
    return Batch(src, tgt, src_mask, tgt_mask)


# -- file corpora ----------------------------------------------------------

def read_lines(path: str | Path) -> list[list[str]]:
    return [ln.split() for ln in Path(path).read_text(encoding="utf-8").splitlines()]


def read_parallel(directory: str | Path) -> tuple[list[list[str]], list[list[str]]]:
    """Read ``source.txt`` / ``target.txt`` (whitespace tokenised, aligned by line)."""
    d = Path(directory)
    src = read_lines(d / "source.txt")
    tgt = read_lines(d / "target.txt")
    if len(src) != len(tgt):
        raise ValueError(f"{d}: {len(src)} source lines vs {len(tgt)} target lines")
    return src, tgt


def write_parallel(directory: str | Path, sources: Iterable[Sequence[str]],
                   targets: Iterable[Sequence[str]]) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "source.txt").write_text("".join(" ".join(s) + "\n" for s in sources), encoding="utf-8")
    (d / "target.txt").write_text("".join(" ".join(t) + "\n" for t in targets), encoding="utf-8")


def encode_parallel(vocab: Vocabulary, sources: Sequence[Sequence[str]],
                    targets: Sequence[Sequence[str]]) -> list[SentencePair]:
    return [SentencePair(tuple(vocab.encode(s)), tuple(vocab.encode(t)))
            for s, t in zip(sources, targets)]


def pairs_to_tokens(vocab: Vocabulary, pairs: Sequence[SentencePair]):
    return ([vocab.decode(p.source) for p in pairs], [vocab.decode(p.target) for p in pairs])
