"""Adam with bias correction, plus the warmup / inverse-square-root schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0

    @classmethod
    def for_params(cls, params: list[Tensor]) -> AdamState:
        return cls(
            first_moment=[np.zeros_like(p.data) for p in params],
            second_moment=[np.zeros_like(p.data) for p in params],
        )


def adam_step(
    params: list[Tensor],
    grads: list[np.ndarray | None],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    """In-place bias-corrected Adam update.

    ``weight_decay`` is classic L2: it is added to the gradient before the
    moment updates.  A missing gradient is treated as zero.
    """
    if len(state.first_moment) != len(params):
        raise ValueError("Adam state does not match parameter list")
    state.step_count += 1
    t = state.step_count
    corr1 = 1.0 - beta1**t
    corr2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if m.shape != p.data.shape:
            raise ValueError(f"Adam state shape {m.shape} != parameter shape {p.data.shape}")
        if g is None:
            g = np.zeros_like(p.data)
        if weight_decay:
            g = g + weight_decay * p.data
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps)


def inverse_sqrt_lr(step: int, peak_lr: float, warmup_steps: int) -> float:
    """Linear warmup to ``peak_lr`` then decay proportional to step**-0.5."""
    step = max(step, 1)
    if warmup_steps <= 0:
        return peak_lr / math.sqrt(step)
    if step < warmup_steps:
        return peak_lr * step / warmup_steps
    return peak_lr * math.sqrt(warmup_steps / step)


@dataclass
class Adam:
    params: list[Tensor]
    lr: float = 5e-4
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    state: AdamState = field(init=False)

    def __post_init__(self):
        self.state = AdamState.for_params(self.params)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self, lr: float | None = None) -> None:
        adam_step(
            self.params,
            [p.grad for p in self.params],
            self.state,
            self.lr if lr is None else lr,
            self.betas[0],
            self.betas[1],
            self.eps,
            self.weight_decay,
        )
