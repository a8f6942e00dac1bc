"""Training loops for the NAT student and the autoregressive teacher."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from . import tensor as T
from .config import TrainConfig, lambda_schedule
from .data import Batch, SentencePair, batchify
from .losses import bow_loss_from_logits, ce_loss, combined_loss, length_loss, smoothed_nll
from .metrics import repeated_token_rate
from .nat import NATModel
from .nn import Module
from .optim import Adam, inverse_sqrt_lr
from .teacher import TeacherModel, distill_dataset, export_encoder_weights, import_encoder_weights

log = logging.getLogger(__name__)

_MODE = {"tf": "train_tf", "ss": "train_ss", "dss": "train_dss"}


@dataclass
class TrainResult:
    metrics: list[dict] = field(default_factory=list)
    averaged_epochs: list[int] = field(default_factory=list)
    train_pairs: list[SentencePair] | None = None


class _BestKeeper:
    """Keeps the ``k`` lowest-loss parameter snapshots for averaging."""

    def __init__(self, k: int):
        self.k = k
        self.items: list[tuple[float, int, dict]] = []

    def offer(self, loss: float, epoch: int, state: dict) -> None:
        if self.k <= 0:
            return
        self.items.append((loss, epoch, state))
        self.items.sort(key=lambda t: (t[0], t[1]))
        del self.items[self.k:]

    def average(self) -> tuple[dict, list[int]]:
        keys = self.items[0][2].keys()
        avg = {k: sum(it[2][k] for it in self.items) / len(self.items) for k in keys}
        return avg, sorted(it[1] for it in self.items)


def _emit(record: dict, stream: IO[str] | None) -> None:
    if stream is not None:
        stream.write(json.dumps(record, sort_keys=True) + "\n")
        stream.flush()


def _check_finite(value: float, what: str, epoch: int, step: int, parts: dict) -> None:
    if not np.isfinite(value):
        detail = ", ".join(f"{k}={v:.6g}" for k, v in parts.items())
        raise FloatingPointError(f"non-finite {what} at epoch {epoch} step {step}: {detail}")


def _repeat_rate_masked(pred: np.ndarray, mask: np.ndarray) -> float:
    seqs = [p[m].tolist() for p, m in zip(pred, mask)]
    return repeated_token_rate(seqs)


# ---------------------------------------------------------------------------
# NAT student
# ---------------------------------------------------------------------------

def nat_batch_loss(model: NATModel, batch: Batch, cfg: TrainConfig, lam: float, mode: str,
                   rng: np.random.Generator | None = None, gt_prob: float = 1.0,
                   gamma: float | None = None):
    """Mean-per-sentence objective ``CE + lambda * BOW + length CE`` and its parts."""
    enc, len_logits, trace, la = model.forward_train(batch, mode, cfg.alpha, rng, gt_prob)
    mask = batch.target_mask
    gamma = cfg.label_smoothing if gamma is None else gamma
    l_ce = ce_loss(la.current_logits, la.left_logits, la.right_logits, batch.target, mask, gamma)
    l_bow = bow_loss_from_logits(la.current_logits, batch.target, mask)
    l_len = length_loss(len_logits, batch.source_lengths, batch.target_lengths, model.cfg.max_delta)
    b = float(len(batch))
    total = (combined_loss(l_ce, l_bow, lam) + l_len) * (1.0 / b)
    pred = np.argmax(la.current_logits.data, axis=-1)
    len_pred = np.argmax(len_logits.data, axis=-1) - model.cfg.max_delta
    stats = {
        "loss": total.item(),
        "ce": l_ce.item() / b,
        "bow": l_bow.item() / b,
        "length_loss": l_len.item() / b,
        "correct": int(((pred == batch.target) & mask).sum()),
        "tokens": int(mask.sum()),
        "length_correct": int((len_pred == batch.target_lengths - batch.source_lengths).sum()),
        "sentences": len(batch),
        "pred": pred,
        "mask": mask,
    }
    return total, stats


def evaluate_nat_loss(model: NATModel, pairs: Sequence[SentencePair], cfg: TrainConfig,
                      lam: float) -> dict:
    """Dev metrics at gold length with inference-mode (argmax) neighbours."""
    model.eval()
    tot = {"loss": 0.0, "correct": 0, "tokens": 0, "length_correct": 0, "sentences": 0}
    preds = []
    with T.no_grad():
        for batch in batchify(pairs, 256):
            _, s = nat_batch_loss(model, batch, cfg, lam, "infer")
            tot["loss"] += s["loss"] * s["sentences"]
            for k in ("correct", "tokens", "length_correct", "sentences"):
                tot[k] += s[k]
            preds += [p[m].tolist() for p, m in zip(s["pred"], s["mask"])]
    return {
        "dev_loss": tot["loss"] / tot["sentences"],
        "dev_token_acc": tot["correct"] / tot["tokens"],
        "dev_length_acc": tot["length_correct"] / tot["sentences"],
        "dev_repeat_rate": repeated_token_rate(preds),
    }


def prepare_kd(model: NATModel, teacher: TeacherModel | None, pairs: Sequence[SentencePair],
               cfg: TrainConfig, beam_width: int = 4) -> list[SentencePair]:
    """Apply distillation and teacher encoder initialisation as configured."""
    if (cfg.use_kd or cfg.init_encoder_from_teacher) and teacher is None:
        raise ValueError("knowledge distillation needs a trained teacher")
    if cfg.init_encoder_from_teacher:
        import_encoder_weights(model, export_encoder_weights(teacher))
    if cfg.use_kd:
        return distill_dataset(teacher, pairs, beam_width)
    return list(pairs)


def train_nat(model: NATModel, pairs: Sequence[SentencePair], cfg: TrainConfig,
              dev_pairs: Sequence[SentencePair] | None = None,
              teacher: TeacherModel | None = None,
              metrics_stream: IO[str] | None = None) -> TrainResult:
    """Train the NAT student; writes one JSON metrics line per epoch to ``metrics_stream``."""
    if not pairs:
        raise ValueError("empty training corpus")
    pairs = prepare_kd(model, teacher, pairs, cfg)
    rng = np.random.default_rng(cfg.seed)
    model.train(True, rng)
    opt = Adam(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    n_batches = (len(pairs) + cfg.batch_size - 1) // cfg.batch_size
    total_steps = cfg.max_steps or cfg.epochs * n_batches
    mode = _MODE[cfg.sampling]
    keeper = _BestKeeper(cfg.avg_best)
    result = TrainResult(train_pairs=pairs)
    step = 0
    for epoch in range(cfg.epochs):
        lam = lambda_schedule(cfg.lambda_spec, epoch)
        model.train(True, rng)
        acc = {"loss": 0.0, "ce": 0.0, "bow": 0.0, "length_loss": 0.0, "correct": 0, "tokens": 0,
               "length_correct": 0, "sentences": 0}
        preds = []
        for batch in batchify(pairs, cfg.batch_size, seed=cfg.seed * 100003 + epoch):
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break
            step += 1
            gt_prob = 1.0 - (1.0 - cfg.ss_min_prob) * min(1.0, step / max(total_steps, 1))
            opt.zero_grad()
            loss, s = nat_batch_loss(model, batch, cfg, lam, mode, rng, gt_prob)
            _check_finite(s["loss"], "loss", epoch, step,
                          {k: s[k] for k in ("ce", "bow", "length_loss")})
            loss.backward()
            opt.step(inverse_sqrt_lr(step, cfg.lr, cfg.warmup_steps))
            n = s["sentences"]
            for k in ("loss", "ce", "bow", "length_loss"):
                acc[k] += s[k] * n
            for k in ("correct", "tokens", "length_correct", "sentences"):
                acc[k] += s[k]
            preds += [p[m].tolist() for p, m in zip(s["pred"], s["mask"])]
        if acc["sentences"] == 0:
            break
        record = {
            "epoch": epoch,
            "lambda": lam,
            "loss": acc["loss"] / acc["sentences"],
            "ce": acc["ce"] / acc["sentences"],
            "bow": acc["bow"] / acc["sentences"],
            "length_loss": acc["length_loss"] / acc["sentences"],
            "length_acc": acc["length_correct"] / acc["sentences"],
            "token_acc": acc["correct"] / acc["tokens"],
            "repeat_rate": repeated_token_rate(preds),
        }
        if dev_pairs:
            record.update(evaluate_nat_loss(model, dev_pairs, cfg, lam))
        score = record.get("dev_loss", record["loss"])
        keeper.offer(score, epoch, model.state_dict())
        result.metrics.append(record)
        _emit(record, metrics_stream)
        log.info("nat epoch %d loss %.4f token_acc %.4f", epoch, record["loss"], record["token_acc"])
    if keeper.items:
        state, epochs = keeper.average()
        model.load_state_dict(state)
        result.averaged_epochs = epochs
    model.eval()
    return result


# ---------------------------------------------------------------------------
# autoregressive teacher
# ---------------------------------------------------------------------------

def teacher_batch_loss(teacher: TeacherModel, batch: Batch, gamma: float):
    enc = teacher.encoder.encode(batch.source, batch.source_mask)
    y_in, y_out, mask = teacher.forced_inputs(batch.target, batch.target_mask)
    logits = teacher.logits(enc, y_in, mask)
    loss = smoothed_nll(logits, y_out, mask, gamma) * (1.0 / len(batch))
    pred = np.argmax(logits.data, axis=-1)
    return loss, int(((pred == y_out) & mask).sum()), int(mask.sum())


def teacher_token_accuracy(teacher: TeacherModel, pairs: Sequence[SentencePair]) -> float:
    """Teacher-forced next-token accuracy (EOS included)."""
    teacher.eval()
    correct = total = 0
    with T.no_grad():
        for batch in batchify(pairs, 256):
            _, c, n = teacher_batch_loss(teacher, batch, 0.0)
            correct += c
            total += n
    return correct / total


def train_teacher(teacher: TeacherModel, pairs: Sequence[SentencePair], cfg: TrainConfig,
                  dev_pairs: Sequence[SentencePair] | None = None,
                  metrics_stream: IO[str] | None = None) -> TrainResult:
    if not pairs:
        raise ValueError("empty training corpus")
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(teacher.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    keeper = _BestKeeper(cfg.avg_best)
    result = TrainResult(train_pairs=list(pairs))
    step = 0
    for epoch in range(cfg.epochs):
        teacher.train(True, rng)
        loss_sum = 0.0
        correct = tokens = sents = 0
        for batch in batchify(pairs, cfg.batch_size, seed=cfg.seed * 100003 + epoch):
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break
            step += 1
            opt.zero_grad()
            loss, c, n = teacher_batch_loss(teacher, batch, cfg.label_smoothing)
            _check_finite(loss.item(), "loss", epoch, step, {"loss": loss.item()})
            loss.backward()
            opt.step(inverse_sqrt_lr(step, cfg.lr, cfg.warmup_steps))
            loss_sum += loss.item() * len(batch)
            correct += c
            tokens += n
            sents += len(batch)
        if sents == 0:
            break
        record = {"epoch": epoch, "loss": loss_sum / sents, "token_acc": correct / tokens}
        if dev_pairs:
            teacher.eval()
            with T.no_grad():
                dl = sum(teacher_batch_loss(teacher, b, cfg.label_smoothing)[0].item() * len(b)
                         for b in batchify(dev_pairs, 256))
            record["dev_loss"] = dl / len(dev_pairs)
            record["dev_token_acc"] = teacher_token_accuracy(teacher, dev_pairs)
        keeper.offer(record.get("dev_loss", record["loss"]), epoch, teacher.state_dict())
        result.metrics.append(record)
        _emit(record, metrics_stream)
        log.info("teacher epoch %d loss %.4f token_acc %.4f", epoch, record["loss"], record["token_acc"])
    if keeper.items:
        state, epochs = keeper.average()
        teacher.load_state_dict(state)
        result.averaged_epochs = epochs
    teacher.eval()
    return result
