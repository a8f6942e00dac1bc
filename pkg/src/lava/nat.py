"""Non-autoregressive decoder with vocabulary attention and look-around readout."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as T
from .config import ModelConfig
from .data import BOS, EOS, Batch
from .encoder import Encoder, EncoderOutput
from .nn import Linear, Module, TransformerBlock, key_padding_bias, NEG_INF
from .tensor import Tensor

READOUT_MODES = ("infer", "train_tf", "train_ss", "train_dss")


# ---------------------------------------------------------------------------
# length prediction and decoder input
# ---------------------------------------------------------------------------

def maxpool_rows(H: Tensor, mask: np.ndarray) -> Tensor:
    """Elementwise max over the unmasked rows of each (n, d) slab."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any(axis=1).all():
        raise ValueError("length prediction needs at least one unmasked source row")
    return T.tmax(T.where(mask[..., None], H, NEG_INF), axis=1)


def length_logits(H: Tensor, mask: np.ndarray, proj: Linear) -> Tensor:
    return proj(maxpool_rows(H, mask))


def predict_length(enc: EncoderOutput, proj: Linear) -> Tensor:
    """Distribution over the 41 length offsets -20..20, shape (B, 41)."""
    return T.softmax(length_logits(enc.H, enc.mask, proj), axis=-1)


def resolve_target_length(n: int, delta: int, max_len: int | None = None) -> int:
    """Target length ``n + delta`` clamped to at least 1 (and at most ``max_len``)."""
    if n < 1:
        raise ValueError("source length must be >= 1")
    m = max(1, n + int(delta))
    return m if max_len is None else min(m, max_len)


def copy_indices(n: int, m: int) -> np.ndarray:
    """Source row feeding each of ``m`` decoder slots: ``floor(n / m * i)``, 0-based."""
    if m < 1 or n < 1:
        raise ValueError("lengths must be >= 1")
    return (n * np.arange(m)) // m


def copy_source_input(H: Tensor, n: int, m: int) -> Tensor:
    """Decoder input for one sentence: rows of ``H`` (n, d) picked by :func:`copy_indices`."""
    return H[copy_indices(n, m)]


def batch_copy_indices(src_lengths: Sequence[int], tgt_lengths: Sequence[int]) -> np.ndarray:
    width = int(max(tgt_lengths))
    idx = np.zeros((len(src_lengths), width), dtype=np.int64)
    for b, (n, m) in enumerate(zip(src_lengths, tgt_lengths)):
        idx[b, :m] = copy_indices(int(n), int(m))
    return idx


# ---------------------------------------------------------------------------
# vocabulary attention
# ---------------------------------------------------------------------------

def vocabulary_attention(z: Tensor, vocab_table: Tensor, scale: float = 1.0) -> tuple[Tensor, Tensor]:
    """Attend from each row of ``z`` over all vocabulary embeddings.

    Returns the weighted mixture of embedding rows and the weights themselves.
    """
    weights = T.softmax(T.linear(z, vocab_table.T) * scale, axis=-1)
    return T.linear(weights, vocab_table), weights


@dataclass
class DecoderTrace:
    Z: list[Tensor]
    A: list[Tensor]
    va_weights: list[Tensor]
    z: Tensor  # representation handed to the readout


@dataclass
class LAOutput:
    left_logits: Tensor | None
    right_logits: Tensor | None
    current_logits: Tensor
    fused: Tensor
    gate_left: Tensor | None
    gate_right: Tensor | None
    left_ids: np.ndarray | None = None
    right_ids: np.ndarray | None = None

    @staticmethod
    def _dist(t: Tensor | None) -> np.ndarray | None:
        return None if t is None else T.softmax_np(t.data)

    @property
    def current_dist(self) -> np.ndarray:
        return T.softmax_np(self.current_logits.data)

    @property
    def left_dist(self) -> np.ndarray | None:
        return self._dist(self.left_logits)

    @property
    def right_dist(self) -> np.ndarray | None:
        return self._dist(self.right_logits)

    def distributions(self) -> list[np.ndarray]:
        return [d for d in (self.left_dist, self.current_dist, self.right_dist) if d is not None]


def peaked_softmax_embed(logits: Tensor, alpha: float, vocab_table: Tensor) -> Tensor:
    """Soft-argmax embedding ``sum_y W[y] * softmax(alpha * s)(y)``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return T.linear(T.softmax(logits * alpha, axis=-1), vocab_table)


class LookAroundHead(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        d, v = cfg.d_model, cfg.vocab_size
        self.ls, self.rs = cfg.ls, cfg.rs
        self.left = Linear(d, v, rng) if cfg.ls else None
        self.right = Linear(d, v, rng) if cfg.rs else None
        self.gate_left = Linear(d, d, rng) if cfg.ls else None
        self.gate_right = Linear(d, d, rng) if cfg.rs else None
        self.current = Linear(3 * d, v, rng)

    def fuse(self, z: Tensor, p_cur: Tensor, p_left: Tensor, p_right: Tensor,
             w_left: Tensor | None, w_right: Tensor | None,
             force_gates: float | None = None):
        """Gate neighbour embeddings and read out the current token logits."""
        zero = np.zeros(z.shape)
        slots = [z + p_cur]
        gates = []
        for w, p, gate in ((w_left, p_left, self.gate_left), (w_right, p_right, self.gate_right)):
            if gate is None or w is None:
                slots.append(Tensor(zero))
                gates.append(None)
                continue
            if force_gates is None:
                c = T.sigmoid(gate(w + p))
            else:
                c = Tensor(np.full(z.shape, float(force_gates)))
            slots.append(c * w)
            gates.append(c)
        fused = T.concat(slots, axis=-1)
        return self.current(fused), fused, gates[0], gates[1]


@dataclass
class NATOutput:
    enc: EncoderOutput
    length_probs: np.ndarray
    lengths: np.ndarray
    trace: DecoderTrace
    la: LAOutput
    target_mask: np.ndarray

    @property
    def tokens(self) -> np.ndarray:
        return np.argmax(self.la.current_logits.data, axis=-1)


class NATModel(Module):
    def __init__(self, cfg: ModelConfig):
        rng = np.random.default_rng(cfg.seed)
        d = cfg.d_model
        self.cfg = cfg
        self.encoder = Encoder(cfg, rng)
        self.length_proj = Linear(d, cfg.n_length_classes, rng)
        self.tgt_emb = T.parameter(rng.normal(0.0, cfg.emb_std, size=(cfg.vocab_size, d)))
        self.va_scale = 1.0 / math.sqrt(d)
        self.dec_pos = T.parameter(rng.normal(0.0, d**-0.5, size=(cfg.max_len, d)))
        self.pos_left_sentinel = T.parameter(rng.normal(0.0, d**-0.5, size=(d,)))
        self.pos_right_sentinel = T.parameter(rng.normal(0.0, d**-0.5, size=(d,)))
        self.va_fuse = [Linear(2 * d, d, rng) for _ in range(cfg.dec_layers)] if cfg.va else []
        self.blocks = [
            TransformerBlock(d, cfg.n_heads, cfg.d_ff, rng, cfg.rel_k, cfg.dropout,
                             cross=cfg.cross_attention, eps=cfg.ln_eps)
            for _ in range(cfg.dec_layers)
        ]
        self.head = LookAroundHead(cfg, rng)
        self.p_drop = cfg.dropout
        self.counters = Counter()

    # -- pieces -----------------------------------------------------------
    def encode(self, src: np.ndarray, src_mask: np.ndarray | None = None) -> EncoderOutput:
        return self.encoder.encode(src, src_mask)

    def length_logits(self, enc: EncoderOutput) -> Tensor:
        return length_logits(enc.H, enc.mask, self.length_proj)

    def predicted_lengths(self, enc: EncoderOutput) -> np.ndarray:
        delta = np.argmax(self.length_logits(enc).data, axis=-1) - self.cfg.max_delta
        n = enc.lengths
        return np.array([resolve_target_length(int(a), int(b), self.cfg.max_len)
                         for a, b in zip(n, delta)])

    def decoder_input(self, enc: EncoderOutput, tgt_lengths: Sequence[int]) -> tuple[Tensor, np.ndarray]:
        if max(tgt_lengths) > self.cfg.max_len:
            raise ValueError("target length exceeds max_len")
        idx = batch_copy_indices(enc.lengths, tgt_lengths)
        mask = np.arange(idx.shape[1])[None, :] < np.asarray(tgt_lengths)[:, None]
        return T.gather_rows(enc.H, idx), mask

    def decoder_forward(self, D: Tensor, enc: EncoderOutput, tgt_mask: np.ndarray) -> DecoderTrace:
        """Run the decoder stack; with VA each layer consumes a projection of ``[Z; A]``."""
        self.counters["decoder_forward"] += 1
        m = D.shape[1]
        z = self.dropout(D + self.dec_pos[:m], self.p_drop)
        self_bias = key_padding_bias(tgt_mask)
        mem_bias = key_padding_bias(enc.mask)
        Zs, As, Ws = [z], [], []
        for i, block in enumerate(self.blocks):
            x = z
            if self.cfg.va:
                a, w = vocabulary_attention(z, self.tgt_emb, self.va_scale)
                As.append(a)
                Ws.append(w)
                x = self.va_fuse[i](T.concat([z, a], axis=-1))
            z = block(x, self_bias, enc.H, mem_bias)
            Zs.append(z)
        if self.cfg.va:
            a, w = vocabulary_attention(z, self.tgt_emb, self.va_scale)
            As.append(a)
            Ws.append(w)
            final = a if self.cfg.va_readout == "vocab" else z + a
        else:
            final = z
        return DecoderTrace(Zs, As, Ws, final)

    def position_tables(self, lengths: Sequence[int], width: int):
        """Current / left / right position embeddings with sentinels at the edges."""
        lengths = np.asarray(lengths)
        ext = T.concat([self.dec_pos, self.pos_left_sentinel.reshape(1, -1),
                        self.pos_right_sentinel.reshape(1, -1)], axis=0)
        L = self.cfg.max_len
        i = np.arange(width)[None, :].repeat(len(lengths), axis=0)
        left = np.where(i > 0, i - 1, L)
        right = np.where(i < lengths[:, None] - 1, np.minimum(i + 1, L - 1), L + 1)
        cur = np.minimum(i, L - 1)
        return T.embedding(ext, cur), T.embedding(ext, left), T.embedding(ext, right)

    @staticmethod
    def neighbor_targets(targets: np.ndarray, lengths: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """Gold left/right neighbours, BOS before the first and EOS after the last token."""
        b, m = targets.shape
        left = np.empty_like(targets)
        right = np.empty_like(targets)
        left[:, 0] = BOS
        left[:, 1:] = targets[:, :-1]
        right[:, :-1] = targets[:, 1:]
        right[:, -1] = EOS
        right[np.arange(b), np.asarray(lengths) - 1] = EOS
        return left, right

    def look_around_readout(self, z: Tensor, lengths: Sequence[int], mode: str = "infer",
                            targets: np.ndarray | None = None, alpha: float = 10.0,
                            rng: np.random.Generator | None = None, gt_prob: float = 1.0,
                            force_gates: float | None = None,
                            neighbor_ids: tuple[np.ndarray, np.ndarray] | None = None) -> LAOutput:
        """Left/right neighbour heads, gated neighbour embeddings, current-token head.

        ``neighbor_ids`` overrides the neighbour tokens fed to the gates (used
        by sequential and refinement decoding).
        """
        if mode not in READOUT_MODES:
            raise ValueError(f"unknown readout mode {mode!r}")
        self.counters["readout_sweeps"] += 1
        head = self.head
        p_cur, p_left, p_right = self.position_tables(lengths, z.shape[1])
        left_logits = head.left(z + p_left) if head.left is not None else None
        right_logits = head.right(z + p_right) if head.right is not None else None

        gold_left = gold_right = None
        if mode in ("train_tf", "train_ss"):
            if targets is None:
                raise ValueError(f"mode {mode} needs targets")
            gold_left, gold_right = self.neighbor_targets(targets, lengths)

        def neighbour(logits: Tensor | None, gold: np.ndarray | None, side: int):
            if logits is None:
                return None, None
            if neighbor_ids is not None:
                ids = np.asarray(neighbor_ids[side], dtype=np.int64)
                return T.embedding(self.tgt_emb, ids), ids
            if mode == "train_dss":
                return peaked_softmax_embed(logits, alpha, self.tgt_emb), None
            pred = np.argmax(logits.data, axis=-1)
            if mode == "infer":
                ids = pred
            elif mode == "train_tf":
                ids = gold
            else:
                coin = (rng if rng is not None else np.random.default_rng()).random(pred.shape)
                ids = np.where(coin < gt_prob, gold, pred)
            return T.embedding(self.tgt_emb, ids), ids

        w_left, left_ids = neighbour(left_logits, gold_left, 0)
        w_right, right_ids = neighbour(right_logits, gold_right, 1)
        current, fused, g_left, g_right = head.fuse(z, p_cur, p_left, p_right,
                                                   w_left, w_right, force_gates)
        return LAOutput(left_logits, right_logits, current, fused, g_left, g_right,
                        left_ids, right_ids)

    # -- full passes --------------------------------------------------------
    def run(self, enc: EncoderOutput, tgt_lengths: Sequence[int], mode: str = "infer", **kw):
        D, tgt_mask = self.decoder_input(enc, tgt_lengths)
        trace = self.decoder_forward(D, enc, tgt_mask)
        la = self.look_around_readout(trace.z, tgt_lengths, mode, **kw)
        return trace, la, tgt_mask

    def forward_train(self, batch: Batch, mode: str, alpha: float = 10.0,
                      rng: np.random.Generator | None = None, gt_prob: float = 1.0):
        """Teacher-forced-length pass used for training and dev loss."""
        enc = self.encode(batch.source, batch.source_mask)
        len_logits = self.length_logits(enc)
        lengths = batch.target_lengths
        trace, la, tgt_mask = self.run(enc, lengths, mode, targets=batch.target,
                                       alpha=alpha, rng=rng, gt_prob=gt_prob)
        return enc, len_logits, trace, la

    def forward(self, x: Sequence[int], length: int | None = None) -> NATOutput:
        """One-pass inference for a single source sentence."""
        src = np.asarray([x], dtype=np.int64)
        enc = self.encode(src)
        len_probs = T.softmax_np(self.length_logits(enc).data)
        m = self.predicted_lengths(enc) if length is None else np.array([length])
        trace, la, tgt_mask = self.run(enc, m, "infer")
        return NATOutput(enc, len_probs, m, trace, la, tgt_mask)

    def forward_lengths(self, x: Sequence[int], lengths: Sequence[int],
                        enc: EncoderOutput | None = None) -> tuple[LAOutput, DecoderTrace]:
        """Decode one source at several target lengths in a single batched pass."""
        if enc is None:
            enc = self.encode(np.asarray([x], dtype=np.int64))
        k = len(lengths)
        enc_k = EncoderOutput(Tensor(np.repeat(enc.H.data, k, axis=0)) if not enc.H.requires_grad
                              else T.concat([enc.H] * k, axis=0),
                              np.repeat(enc.mask, k, axis=0))
        trace, la, _ = self.run(enc_k, lengths, "infer")
        return la, trace


def nat_forward(model: NATModel, x: Sequence[int]) -> NATOutput:
    if len(x) == 0:
        raise ValueError("source must be non-empty")
    with T.no_grad():
        return model.forward(x)
