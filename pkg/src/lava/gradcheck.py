"""Central finite-difference gradient checks."""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .tensor import Tensor


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5) -> float:
    """Max relative error between backprop and central differences of ``f`` at ``x``.

    ``f`` must return a scalar Tensor.  ``x.data`` is perturbed in place and
    restored afterwards.
    """
    x.requires_grad = True
    x.grad = None
    out = f(x)
    out.backward()
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()
    x.grad = None

    numeric = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    nflat = numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x).item()
        flat[i] = orig - h
        fm = f(x).item()
        flat[i] = orig
        nflat[i] = (fp - fm) / (2.0 * h)
    return _rel_err(analytic, numeric)


def grad_check_params(
    loss_fn: Callable[[], Tensor],
    params: Iterable[tuple[str, Tensor]],
    h: float = 1e-5,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> dict[str, float]:
    """Per-parameter max relative error for a closure over model parameters.

    When ``max_entries`` is set, only that many randomly chosen entries of
    each parameter are perturbed (the analytic side is still the full grad).
    """
    params = list(params)
    for _, p in params:
        p.grad = None
    loss_fn().backward()
    analytic = {name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
                for name, p in params}
    for _, p in params:
        p.grad = None

    rng = rng or np.random.default_rng(0)
    errors: dict[str, float] = {}
    for name, p in params:
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = rng.choice(flat.size, size=max_entries, replace=False)
        a = analytic[name].reshape(-1)[idx]
        n = np.empty_like(a)
        for k, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + h
            fp = loss_fn().item()
            flat[i] = orig - h
            fm = loss_fn().item()
            flat[i] = orig
            n[k] = (fp - fm) / (2.0 * h)
        errors[name] = _rel_err(a, n)
    return errors


def tiny_nat_config(**overrides):
    from .config import ModelConfig

    base = dict(vocab_size=8, d_model=8, n_heads=2, d_ff=16, enc_layers=1, dec_layers=1,
                max_len=8, rel_k=2, dropout=0.0, max_delta=3)
    base.update(overrides)
    return ModelConfig(**base)


def check_nat_loss(seed: int = 0, sampling: str = "dss", h: float = 1e-5,
                   max_entries: int | None = None, **overrides) -> dict[str, float]:
    """Check every parameter of a tiny NAT against the full training objective
    (CE with both neighbour heads, BOW, length CE) on one 2-token pair."""
    from .config import TrainConfig
    from .data import make_batch
    from .nat import NATModel
    from .training import nat_batch_loss

    model = NATModel(tiny_nat_config(seed=seed, **overrides))
    model.eval()  # dropout off; the readout mode still follows ``sampling``
    rng = np.random.default_rng(seed)
    src = rng.integers(4, model.cfg.vocab_size, size=2)
    tgt = rng.integers(4, model.cfg.vocab_size, size=2)
    batch = make_batch([src.tolist()], [tgt.tolist()])
    cfg = TrainConfig(sampling=sampling, label_smoothing=0.1, alpha=3.0)
    mode = {"tf": "train_tf", "ss": "train_ss", "dss": "train_dss"}[sampling]

    def loss():
        # fixed rng so scheduled-sampling coin flips match across perturbations
        return nat_batch_loss(model, batch, cfg, 0.5, mode, np.random.default_rng(1), 0.5)[0]

    return grad_check_params(loss, model.named_parameters(), h, max_entries, rng)
