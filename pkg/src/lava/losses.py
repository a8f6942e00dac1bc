"""Cross-entropy with look-around terms, bag-of-words loss and their combination."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .nn import Linear
from .tensor import Tensor


def _pick(logp: Tensor, targets: np.ndarray) -> Tensor:
    """``logp[..., targets]`` as a Tensor with the target axis dropped."""
    onehot = np.zeros(logp.shape)
    np.put_along_axis(onehot, targets[..., None], 1.0, axis=-1)
    return (logp * onehot).sum(axis=-1)


def smoothed_nll(logits: Tensor, targets: np.ndarray, mask: np.ndarray, gamma: float = 0.0) -> Tensor:
    """Sum over unmasked positions of ``(1-g) * NLL(target) + g * mean_v NLL(v)``."""
    if logits.shape[:-1] != targets.shape:
        raise ValueError(f"logits {logits.shape} do not match targets {targets.shape}")
    logp = T.log_softmax(logits, axis=-1)
    nll = -_pick(logp, targets)
    if gamma:
        nll = nll * (1.0 - gamma) - logp.mean(axis=-1) * gamma
    return (nll * mask.astype(float)).sum()


def ce_loss(current_logits: Tensor, left_logits: Tensor | None, right_logits: Tensor | None,
            targets: np.ndarray, mask: np.ndarray, gamma: float = 0.0,
            left_targets: np.ndarray | None = None,
            right_targets: np.ndarray | None = None) -> Tensor:
    """Label-smoothed current-token NLL plus plain NLL of both neighbour heads.

    Neighbour targets default to the shifted gold sequence with BOS/EOS at
    the edges.
    """
    targets = np.asarray(targets)
    mask = np.asarray(mask, dtype=bool)
    if current_logits.shape[:-1] != targets.shape:
        raise ValueError("number of distributions does not match target length")
    if left_targets is None or right_targets is None:
        from .nat import NATModel
        lt, rt = NATModel.neighbor_targets(targets, mask.sum(axis=1))
        left_targets = lt if left_targets is None else left_targets
        right_targets = rt if right_targets is None else right_targets
    loss = smoothed_nll(current_logits, targets, mask, gamma)
    if left_logits is not None:
        loss = loss + smoothed_nll(left_logits, left_targets, mask)
    if right_logits is not None:
        loss = loss + smoothed_nll(right_logits, right_targets, mask)
    return loss


def bag_of_words(targets: np.ndarray, mask: np.ndarray, vocab_size: int) -> np.ndarray:
    """(B, V) set-membership indicator of each target sentence."""
    targets = np.asarray(targets)
    ind = np.zeros((targets.shape[0], vocab_size))
    rows = np.broadcast_to(np.arange(targets.shape[0])[:, None], targets.shape)
    ind[rows[mask], targets[mask]] = 1.0
    return ind


def bow_loss_from_logits(current_logits: Tensor, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """``-sum_v 1{v in y*} log sigmoid(sum_i logits_i(v))`` summed over the batch."""
    mask = np.asarray(mask, dtype=bool)
    summed = (current_logits * mask[..., None].astype(float)).sum(axis=1)
    ind = bag_of_words(targets, mask, current_logits.shape[-1])
    return -(T.log_sigmoid(summed) * ind).sum()


def bow_loss(fused: Tensor, readout: Linear, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """Bag-of-words loss from fused representations through the current-token readout."""
    return bow_loss_from_logits(readout(fused), targets, mask)


def combined_loss(l_ce: Tensor, l_bow: Tensor, lam: float) -> Tensor:
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return l_ce + l_bow * lam


def length_loss(len_logits: Tensor, src_lengths: np.ndarray, tgt_lengths: np.ndarray,
                max_delta: int) -> Tensor:
    """Cross-entropy of the length offset, out-of-range offsets clipped to the edge classes."""
    cls = np.clip(np.asarray(tgt_lengths) - np.asarray(src_lengths), -max_delta, max_delta) + max_delta
    logp = T.log_softmax(len_logits, axis=-1)
    return -_pick(logp, cls).sum()
