"""Figures written next to the JSON outputs of ``train-nat``, ``train-teacher`` and ``bench``."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from matplotlib.figure import Figure
from matplotlib.ticker import MaxNLocator

from .bench import BASELINE, BenchReport


def _finish(fig: Figure, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    return path


def plot_training_curves(metrics: Sequence[dict], path: str | Path, title: str = "") -> Path:
    """Loss (left) and accuracies / repeat rate (right) per epoch."""
    if not metrics:
        raise ValueError("no epochs to plot")
    epochs = [m["epoch"] for m in metrics]
    fig = Figure(figsize=(9, 3.6))
    ax_loss, ax_acc = fig.subplots(1, 2)
    for key in ("loss", "dev_loss", "ce", "bow", "length_loss"):
        if key in metrics[0]:
            ax_loss.plot(epochs, [m[key] for m in metrics], marker="o", ms=3, label=key)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("per-sentence loss")
    ax_loss.set_yscale("log")
    ax_loss.legend(fontsize=8)
    for key in ("token_acc", "dev_token_acc", "length_acc", "dev_length_acc",
                "repeat_rate", "dev_repeat_rate"):
        if key in metrics[0]:
            ax_acc.plot(epochs, [m[key] for m in metrics], marker="o", ms=3, label=key)
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylim(-0.02, 1.02)
    ax_acc.legend(fontsize=8)
    for ax in (ax_loss, ax_acc):
        ax.xaxis.set_major_locator(MaxNLocator(integer=True))
        ax.spines["top"].set_visible(False)
        ax.spines["right"].set_visible(False)
    if title:
        fig.suptitle(title)
    return _finish(fig, path)


def plot_latency(report: BenchReport, path: str | Path) -> Path:
    """Horizontal bars of ms/sentence, annotated with the speedup over the AT beam."""
    names = list(report.strategies)
    if not names:
        raise ValueError("empty benchmark report")
    lat = [report.strategies[n].latency_ms for n in names]
    fig = Figure(figsize=(6.5, 0.5 * len(names) + 1.2))
    ax = fig.subplots()
    colors = ["tab:gray" if n.startswith("at-") else "tab:blue" for n in names]
    ax.barh(names, lat, color=colors)
    for i, n in enumerate(names):
        sp = report.strategies[n].speedup
        if sp is not None:
            ax.text(lat[i], i, f" {sp:.1f}x", va="center", fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("ms / sentence (batch 1, one thread)")
    ax.set_title(f"{report.n_sentences} sentences, mean source length "
                 f"{report.mean_source_length:.1f}; speedup vs {BASELINE}", fontsize=9)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    return _finish(fig, path)
