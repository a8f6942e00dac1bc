"""Parameter containers and transformer building blocks."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from . import tensor as T
from .tensor import Tensor

NEG_INF = -1e9  # finite stand-in for -inf: exp() underflows to exactly 0


class Module:
    training: bool = False
    rng: np.random.Generator | None = None

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, val in vars(self).items():
            if isinstance(val, Tensor):
                if val.requires_grad:
                    yield prefix + name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(f"{prefix}{name}.")
            elif isinstance(val, (list, tuple)) and val and isinstance(val[0], Module):
                for i, m in enumerate(val):
                    yield from m.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator[Module]:
        yield self
        for val in vars(self).values():
            if isinstance(val, Module):
                yield from val.modules()
            elif isinstance(val, (list, tuple)) and val and isinstance(val[0], Module):
                for m in val:
                    yield from m.modules()

    def train(self, mode: bool = True, rng: np.random.Generator | None = None) -> Module:
        for m in self.modules():
            m.training = mode
            if rng is not None:
                m.rng = rng
        return self

    def eval(self) -> Module:
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True,
                        prefix: str = "") -> None:
        """Copy arrays into parameters; a missing key raises ``KeyError`` naming it."""
        own = dict(self.named_parameters())
        for name, p in own.items():
            if not name.startswith(prefix):
                continue
            if name not in state:
                raise KeyError(f"missing parameter '{name}'")
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for '{name}': {arr.shape} vs {p.data.shape}")
            p.data = arr.copy()
        if strict:
            extra = [k for k in state if k.startswith(prefix) and k not in own]
            if extra:
                raise KeyError(f"unexpected parameter '{extra[0]}'")

    def dropout(self, x: Tensor, p: float) -> Tensor:
        return T.dropout(x, p, self.rng, self.training)


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        self.weight = T.parameter(xavier(rng, d_in, d_out))
        self.bias = T.parameter(np.zeros(d_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return T.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, d: int, eps: float = 1e-5):
        self.gain = T.parameter(np.ones(d))
        self.bias = T.parameter(np.zeros(d))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gain, self.bias, self.eps)


def relative_offset(i: int, j: int, k: int) -> int:
    """Bucket of key ``j`` seen from query ``i``: ``clamp(j - i, -k, k) + k``."""
    if i < 0 or j < 0:
        raise ValueError("positions must be non-negative")
    return max(-k, min(k, j - i)) + k


def relative_buckets(q_pos: np.ndarray, k_pos: np.ndarray, k: int) -> np.ndarray:
    q_pos = np.asarray(q_pos)
    k_pos = np.asarray(k_pos)
    return np.clip(k_pos[None, :] - q_pos[:, None], -k, k) + k


def key_padding_bias(mask: np.ndarray) -> np.ndarray:
    """(B, nk) boolean keep-mask -> additive bias broadcastable to (B, h, nq, nk)."""
    return np.where(mask, 0.0, NEG_INF)[:, None, None, :]


def causal_bias(n: int) -> np.ndarray:
    return np.triu(np.full((n, n), NEG_INF), k=1)


class MultiHeadAttention(Module):
    """Multi-head attention; with ``rel_k`` set, adds learned relative-key terms.

    The relative table has ``2k + 1`` rows of head width and is shared by
    all heads.  It enters the logits only (keys), not the values.
    """

    def __init__(self, d: int, n_heads: int, rng: np.random.Generator, rel_k: int | None = None):
        self.n_heads = n_heads
        self.head_dim = d // n_heads
        self.rel_k = rel_k
        self.wq = Linear(d, d, rng)
        self.wk = Linear(d, d, rng)
        self.wv = Linear(d, d, rng)
        self.wo = Linear(d, d, rng)
        if rel_k is not None:
            self.rel_keys = T.parameter(rng.normal(0.0, self.head_dim**-0.5,
                                                   size=(2 * rel_k + 1, self.head_dim)))
        self.last_weights: np.ndarray | None = None

    def split_heads(self, x: Tensor) -> Tensor:
        b, n, _ = x.shape
        return x.reshape(b, n, self.n_heads, self.head_dim).transpose(0, 2, 1, 3)

    def project_kv(self, x: Tensor) -> tuple[Tensor, Tensor]:
        return self.split_heads(self.wk(x)), self.split_heads(self.wv(x))

    def attend(self, q_in: Tensor, k: Tensor, v: Tensor, bias: np.ndarray | None,
               q_pos: np.ndarray | None = None, k_pos: np.ndarray | None = None) -> Tensor:
        q = self.split_heads(self.wq(q_in))
        logits = T.matmul(q, T.swapaxes(k, -1, -2))
        if self.rel_k is not None:
            buckets = relative_buckets(q_pos, k_pos, self.rel_k)
            rel = T.gather_last(T.matmul(q, self.rel_keys.T), buckets)
            logits = logits + rel
        logits = logits * (1.0 / math.sqrt(self.head_dim))
        if bias is not None:
            logits = logits + bias
        weights = T.softmax(logits, axis=-1)
        self.last_weights = weights.data
        ctx = T.matmul(weights, v)
        b, _, nq, _ = ctx.shape
        ctx = ctx.transpose(0, 2, 1, 3).reshape(b, nq, self.n_heads * self.head_dim)
        return self.wo(ctx)

    def __call__(self, q_in: Tensor, kv_in: Tensor, bias: np.ndarray | None) -> Tensor:
        k, v = self.project_kv(kv_in)
        pos_q = np.arange(q_in.shape[1])
        pos_k = np.arange(kv_in.shape[1])
        return self.attend(q_in, k, v, bias, pos_q, pos_k)


class FeedForward(Module):
    def __init__(self, d: int, d_ff: int, rng: np.random.Generator):
        self.fc1 = Linear(d, d_ff, rng)
        self.fc2 = Linear(d_ff, d, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(T.relu(self.fc1(x)))


class TransformerBlock(Module):
    """Post-norm block: relative self-attention, optional cross-attention, FFN."""

    def __init__(self, d: int, n_heads: int, d_ff: int, rng: np.random.Generator,
                 rel_k: int, dropout: float = 0.0, cross: bool = False, eps: float = 1e-5):
        self.self_attn = MultiHeadAttention(d, n_heads, rng, rel_k=rel_k)
        self.ln_self = LayerNorm(d, eps)
        self.cross_attn = MultiHeadAttention(d, n_heads, rng) if cross else None
        self.ln_cross = LayerNorm(d, eps) if cross else None
        self.ffn = FeedForward(d, d_ff, rng)
        self.ln_ffn = LayerNorm(d, eps)
        self.p_drop = dropout

    def __call__(self, x: Tensor, self_bias: np.ndarray | None,
                 memory: Tensor | None = None, memory_bias: np.ndarray | None = None) -> Tensor:
        x = self.ln_self(x + self.dropout(self.self_attn(x, x, self_bias), self.p_drop))
        if self.cross_attn is not None:
            c = self.cross_attn(x, memory, memory_bias)
            x = self.ln_cross(x + self.dropout(c, self.p_drop))
        return self.ln_ffn(x + self.dropout(self.ffn(x), self.p_drop))

    def step(self, x_new: Tensor, pos: int, cache: dict, memory_kv: tuple[Tensor, Tensor] | None,
             memory_bias: np.ndarray | None) -> Tensor:
        """Causal single-position update reusing cached keys/values of earlier positions."""
        k_new, v_new = self.self_attn.project_kv(x_new)
        if "k" in cache:
            cache["k"] = T.concat([cache["k"], k_new], axis=2)
            cache["v"] = T.concat([cache["v"], v_new], axis=2)
        else:
            cache["k"], cache["v"] = k_new, v_new
        a = self.self_attn.attend(x_new, cache["k"], cache["v"], None,
                                  np.array([pos]), np.arange(pos + 1))
        x = self.ln_self(x_new + a)
        if self.cross_attn is not None:
            mk, mv = memory_kv
            x = self.ln_cross(x + self.cross_attn.attend(x, mk, mv, memory_bias))
        return self.ln_ffn(x + self.ffn(x))
