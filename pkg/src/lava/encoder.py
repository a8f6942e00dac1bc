"""Token/position embedding and the transformer encoder stack."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .config import ModelConfig
from .nn import Module, TransformerBlock, key_padding_bias, relative_offset  # noqa: F401
from .tensor import Tensor


@dataclass
class EncoderOutput:
    """Contextual source states ``H`` (B, n, d) with their keep-mask."""

    H: Tensor
    mask: np.ndarray

    @property
    def lengths(self) -> np.ndarray:
        return self.mask.sum(axis=1)

    @property
    def n(self) -> int:
        return self.H.shape[1]


def embed_tokens(ids: np.ndarray, token_table: Tensor, pos_table: Tensor) -> Tensor:
    """``sqrt(d) * token_table[ids] + pos_table[position]`` over the last id axis."""
    ids = np.asarray(ids, dtype=np.int64)
    n = ids.shape[-1]
    if n > pos_table.shape[0]:
        raise ValueError(f"sequence length {n} exceeds max_len {pos_table.shape[0]}")
    if ids.size and ids.max() >= token_table.shape[0]:
        raise IndexError("token id outside vocabulary")
    d = token_table.shape[1]
    tok = T.embedding(token_table, ids) * math.sqrt(d)
    return tok + pos_table[:n]


class Encoder(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        d = cfg.d_model
        self.tok_emb = T.parameter(rng.normal(0.0, d**-0.5, size=(cfg.vocab_size, d)))
        self.pos_emb = T.parameter(rng.normal(0.0, d**-0.5, size=(cfg.max_len, d)))
        self.blocks = [
            TransformerBlock(d, cfg.n_heads, cfg.d_ff, rng, cfg.rel_k, cfg.dropout, eps=cfg.ln_eps)
            for _ in range(cfg.enc_layers)
        ]
        self.p_drop = cfg.dropout

    def __call__(self, ids: np.ndarray, mask: np.ndarray | None = None) -> EncoderOutput:
        return self.encode(ids, mask)

    def encode(self, ids: np.ndarray, mask: np.ndarray | None = None) -> EncoderOutput:
        ids = np.atleast_2d(np.asarray(ids, dtype=np.int64))
        if ids.shape[1] == 0:
            raise ValueError("cannot encode an empty source")
        if mask is None:
            mask = np.ones(ids.shape, dtype=bool)
        mask = np.atleast_2d(np.asarray(mask, dtype=bool))
        x = self.dropout(embed_tokens(ids, self.tok_emb, self.pos_emb), self.p_drop)
        bias = key_padding_bias(mask)
        for block in self.blocks:
            x = block(x, bias)
        return EncoderOutput(x, mask)
