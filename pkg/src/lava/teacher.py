"""Autoregressive transformer teacher: scoring, beam search, distillation."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .config import ModelConfig
from .data import BOS, EOS, PAD, SentencePair, pad_sequences
from .encoder import Encoder, EncoderOutput, embed_tokens
from .nn import Module, TransformerBlock, causal_bias, key_padding_bias
from .tensor import Tensor, log_softmax_np

_FORBIDDEN = (PAD, BOS)


class TeacherModel(Module):
    """Encoder (same layout as the NAT encoder) + causal decoder with cross-attention.

    The output projection is tied to the target embedding table.
    """

    def __init__(self, cfg: ModelConfig):
        rng = np.random.default_rng(cfg.seed)
        d = cfg.d_model
        self.cfg = cfg
        self.encoder = Encoder(cfg, rng)
        self.tgt_emb = T.parameter(rng.normal(0.0, d**-0.5, size=(cfg.vocab_size, d)))
        self.dec_pos = T.parameter(rng.normal(0.0, d**-0.5, size=(cfg.max_len, d)))
        self.out_bias = T.parameter(np.zeros(cfg.vocab_size))
        self.blocks = [
            TransformerBlock(d, cfg.n_heads, cfg.d_ff, rng, cfg.rel_k, cfg.dropout,
                             cross=True, eps=cfg.ln_eps)
            for _ in range(cfg.dec_layers)
        ]
        self.p_drop = cfg.dropout
        self.counters = Counter()

    # -- teacher-forced pass ----------------------------------------------
    def logits(self, enc: EncoderOutput, y_in: np.ndarray, y_mask: np.ndarray) -> Tensor:
        x = self.dropout(embed_tokens(y_in, self.tgt_emb, self.dec_pos), self.p_drop)
        bias = key_padding_bias(y_mask) + causal_bias(y_in.shape[1])
        mem_bias = key_padding_bias(enc.mask)
        for block in self.blocks:
            x = block(x, bias, enc.H, mem_bias)
        return T.linear(x, self.tgt_emb.T, self.out_bias)

    def forced_inputs(self, targets: np.ndarray, target_mask: np.ndarray):
        """Shift targets right behind BOS and append EOS to the gold outputs."""
        b, m = targets.shape
        lengths = target_mask.sum(axis=1)
        y_in = np.full((b, m + 1), PAD, dtype=np.int64)
        y_out = np.full((b, m + 1), PAD, dtype=np.int64)
        y_in[:, 0] = BOS
        y_in[:, 1:] = targets
        y_out[:, :m] = targets
        y_out[np.arange(b), lengths] = EOS
        mask = np.zeros((b, m + 1), dtype=bool)
        mask[:, :] = np.arange(m + 1)[None, :] <= lengths[:, None]
        y_in = np.where(mask, y_in, PAD)
        return y_in, y_out, mask

    def _check_target(self, y: Sequence[int]) -> None:
        if len(y) == 0:
            raise ValueError("cannot score an empty target")
        if len(y) + 1 > self.cfg.max_len:
            raise ValueError(f"target of length {len(y)} exceeds max_len")
        for t in y:
            if t == PAD:
                raise ValueError("target contains PAD; padded sequences are not scored")
            if not 0 <= t < self.cfg.vocab_size:
                raise ValueError(f"token id {t} outside vocabulary")

    def score_batch(self, x: Sequence[int], ys: Sequence[Sequence[int]],
                    enc: EncoderOutput | None = None) -> np.ndarray:
        """Teacher-forced log p(y | x) (EOS included) for several candidates of one source."""
        for y in ys:
            self._check_target(y)
        with T.no_grad():
            if enc is None:
                enc = self.encoder.encode(np.asarray([x]))
            enc_b = EncoderOutput(Tensor(np.repeat(enc.H.data, len(ys), axis=0)),
                                  np.repeat(enc.mask, len(ys), axis=0))
            tgt, tmask = pad_sequences(ys)
            y_in, y_out, mask = self.forced_inputs(tgt, tmask)
            logp = log_softmax_np(self.logits(enc_b, y_in, mask).data)
        self.counters["score_passes"] += 1
        tok = np.take_along_axis(logp, y_out[..., None], axis=-1)[..., 0]
        return np.where(mask, tok, 0.0).sum(axis=1)

    def score_sequence(self, x: Sequence[int], y: Sequence[int]) -> float:
        """log p(y, EOS | x) in one teacher-forced pass."""
        return float(self.score_batch(x, [y])[0])

    # -- incremental decoding ---------------------------------------------
    def start(self, x: Sequence[int], n_hyp: int = 1) -> dict:
        enc = self.encoder.encode(np.asarray([x]))
        mem_bias = key_padding_bias(enc.mask)
        memory = [blk.cross_attn.project_kv(enc.H) for blk in self.blocks]
        state = {"pos": 0, "caches": [{} for _ in self.blocks],
                 "memory": memory, "mem_bias": mem_bias}
        return self.reorder(state, np.zeros(n_hyp, dtype=np.int64))

    @staticmethod
    def reorder(state: dict, index: np.ndarray) -> dict:
        """Select hypotheses ``index`` from every cached tensor."""
        def sel(t: Tensor) -> Tensor:
            return Tensor(t.data[index])

        return {
            "pos": state["pos"],
            "caches": [{k: sel(v) for k, v in c.items()} for c in state["caches"]],
            "memory": [(sel(k), sel(v)) for k, v in state["memory"]],
            "mem_bias": state["mem_bias"][np.zeros(len(index), dtype=np.int64)],
        }

    def step(self, state: dict, tokens: np.ndarray) -> np.ndarray:
        """Feed one token per hypothesis; returns next-token log-probs (n_hyp, V)."""
        pos = state["pos"]
        if pos >= self.cfg.max_len:
            raise ValueError("decoding ran past max_len")
        d = self.cfg.d_model
        tokens = np.asarray(tokens, dtype=np.int64)
        x = T.embedding(self.tgt_emb, tokens[:, None]) * math.sqrt(d) + self.dec_pos[pos:pos + 1]
        for blk, cache, mem in zip(self.blocks, state["caches"], state["memory"]):
            x = blk.step(x, pos, cache, mem, state["mem_bias"])
        state["pos"] = pos + 1
        self.counters["step_readouts"] += 1
        logits = T.linear(x, self.tgt_emb.T, self.out_bias).data[:, 0]
        return log_softmax_np(logits)

    def incremental_score(self, x: Sequence[int], y: Sequence[int]) -> float:
        """Sum of stepwise log-probs from a token-at-a-time rollout."""
        self._check_target(y)
        total = 0.0
        with T.no_grad():
            state = self.start(x)
            prev = BOS
            for tok in list(y) + [EOS]:
                logp = self.step(state, np.array([prev]))
                total += float(logp[0, tok])
                prev = tok
        return total

    def default_max_len(self, x: Sequence[int]) -> int:
        return min(self.cfg.max_len - 1, 2 * len(x) + 10)

    def greedy_decode(self, x: Sequence[int], max_len: int | None = None) -> list[int]:
        max_len = max_len or self.default_max_len(x)
        out: list[int] = []
        with T.no_grad():
            state = self.start(x)
            prev = BOS
            for t in range(max_len + 1):
                logp = self._mask_logp(self.step(state, np.array([prev]))[0], t, max_len)
                tok = int(np.argmax(logp))
                if tok == EOS:
                    break
                out.append(tok)
                prev = tok
        return out

    @staticmethod
    def _mask_logp(logp: np.ndarray, t: int, max_len: int) -> np.ndarray:
        logp = logp.copy()
        logp[..., list(_FORBIDDEN)] = -np.inf
        if t == 0:
            logp[..., EOS] = -np.inf
        if t >= max_len:
            eos = logp[..., EOS].copy()
            logp[...] = -np.inf
            logp[..., EOS] = eos
        return logp

    def beam_decode(self, x: Sequence[int], beam_width: int = 4,
                    max_len: int | None = None) -> tuple[list[int], float]:
        """Beam search; returns the best finished hypothesis and its length-normalised score.

        The normaliser is the number of predicted tokens, EOS included.
        """
        if beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        max_len = max_len or self.default_max_len(x)
        finished: list[tuple[float, list[int], float]] = []
        with T.no_grad():
            state = self.start(x, 1)
            seqs: list[list[int]] = [[]]
            scores = np.zeros(1)
            last = np.array([BOS])
            for t in range(max_len + 1):
                logp = self._mask_logp(self.step(state, last), t, max_len)
                total = scores[:, None] + logp
                flat = total.reshape(-1)
                order = np.argsort(-flat, kind="stable")[: 2 * beam_width]
                keep_rows, keep_toks, keep_scores = [], [], []
                for idx in order:
                    if not np.isfinite(flat[idx]):
                        break
                    row, tok = divmod(int(idx), logp.shape[1])
                    if tok == EOS:
                        seq = seqs[row]
                        finished.append((flat[idx] / (len(seq) + 1), seq, float(flat[idx])))
                    else:
                        keep_rows.append(row)
                        keep_toks.append(tok)
                        keep_scores.append(flat[idx])
                    if len(keep_rows) == beam_width:
                        break
                if len(finished) >= beam_width or not keep_rows:
                    break
                state = self.reorder(state, np.asarray(keep_rows))
                state["pos"] = t + 1
                seqs = [seqs[r] + [tk] for r, tk in zip(keep_rows, keep_toks)]
                scores = np.asarray(keep_scores)
                last = np.asarray(keep_toks)
        best = max(finished, key=lambda f: f[0])
        return best[1], float(best[0])


def distill_dataset(teacher: TeacherModel, pairs: Sequence[SentencePair],
                    beam_width: int = 4) -> list[SentencePair]:
    """Replace every target with the teacher's beam output for its source."""
    teacher.eval()
    cache: dict[tuple[int, ...], tuple[int, ...]] = {}
    out = []
    for p in pairs:
        if p.source not in cache:
            y, _ = teacher.beam_decode(p.source, beam_width)
            cache[p.source] = tuple(y)
        out.append(SentencePair(p.source, cache[p.source]))
    return out


def export_encoder_weights(teacher: TeacherModel) -> dict[str, np.ndarray]:
    """Encoder parameters keyed ``encoder.<name>`` for NAT initialisation."""
    return {f"encoder.{k}": v for k, v in teacher.encoder.state_dict().items()}


def import_encoder_weights(model: Module, weights: dict[str, np.ndarray]) -> None:
    """Load ``encoder.*`` weights into ``model.encoder``; a missing key raises ``KeyError``."""
    enc = model.encoder
    stripped = {}
    for k, v in weights.items():
        if not k.startswith("encoder."):
            raise KeyError(f"unexpected parameter '{k}'")
        stripped[k[len("encoder."):]] = v
    for name in dict(enc.named_parameters()):
        if name not in stripped:
            raise KeyError(f"missing parameter 'encoder.{name}'")
    enc.load_state_dict(stripped, strict=True)
