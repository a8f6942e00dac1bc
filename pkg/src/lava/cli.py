"""Command-line entry point. Every subcommand prints one JSON object on stdout.

A ``--config FILE`` of ``key = value`` lines supplies flags (names without the
leading dashes); flags given on the command line take precedence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from . import decoding
from .bench import BENCH_STRATEGIES, latency_bench
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import SAMPLING_MODES, ModelConfig, TrainConfig
from .data import (TASKS, Vocabulary, build_vocab, encode_parallel, gen_synthetic, read_lines,
                   read_parallel, synthetic_vocab, write_parallel)
from .gradcheck import check_nat_loss
from .metrics import bleu, exact_match, repeated_token_rate
from .nat import NATModel
from .teacher import TeacherModel, distill_dataset
from .training import train_nat, train_teacher

log = logging.getLogger("lava")

GRAD_TOLERANCE = 1e-4


def on_off(value: str) -> bool:
    v = value.lower()
    if v in ("on", "true", "1", "yes"):
        return True
    if v in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {value!r}")


def side_sizes(value: str) -> tuple[int, int]:
    try:
        ls, rs = (int(v) for v in value.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LS,RS such as 1,1; got {value!r}") from None
    if ls not in (0, 1) or rs not in (0, 1):
        raise argparse.ArgumentTypeError("LS and RS must each be 0 or 1")
    return ls, rs


def read_config_file(path: str) -> list[str]:
    """Turn ``key = value`` lines into ``--key value`` tokens."""
    tokens = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        tokens += ["--" + key.replace("_", "-"), value]
    return tokens


# -- parser ---------------------------------------------------------------

def _model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--d-model", type=int, default=64)
    g.add_argument("--heads", type=int, default=4)
    g.add_argument("--d-ff", type=int, default=128)
    g.add_argument("--enc-layers", type=int, default=2)
    g.add_argument("--dec-layers", type=int, default=2)
    g.add_argument("--max-len", type=int, default=64)
    g.add_argument("--rel-k", type=int, default=4)
    g.add_argument("--dropout", type=float, default=0.1)


def _train_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--data", required=True, help="directory with source.txt / target.txt")
    g.add_argument("--dev", help="held-out directory, same layout")
    g.add_argument("--vocab", help="vocabulary file (default: DATA/vocab.txt, else built)")
    g.add_argument("--out", required=True, help="checkpoint path")
    g.add_argument("--epochs", type=int, default=10)
    g.add_argument("--batch-size", type=int, default=64)
    g.add_argument("--lr", type=float, default=1e-3)
    g.add_argument("--warmup", type=int, default=200)
    g.add_argument("--weight-decay", type=float, default=0.0)
    g.add_argument("--label-smoothing", type=float, default=0.1)
    g.add_argument("--avg-best", type=int, default=5)
    g.add_argument("--max-steps", type=int)
    g.add_argument("--no-plot", action="store_true", help="skip the training-curve figure")


def _decode_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("decoding")
    g.add_argument("--strategy", choices=decoding.STRATEGIES, default="greedy")
    g.add_argument("--candidates", type=int, default=10, help="NPD length candidates")
    g.add_argument("--samples", type=int, default=10, help="link-and-rescore samples")
    g.add_argument("--direction", choices=("L2R", "R2L"), default="L2R")
    g.add_argument("--beam", type=int, default=1, help="sequential decoding beam")
    g.add_argument("--threshold", type=float, default=0.5)
    g.add_argument("--max-rounds", type=int, default=4)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lava", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key = value file of flags")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = add("gen-data", "write a synthetic parallel corpus")
    p.add_argument("--task", choices=TASKS, default="copy")
    p.add_argument("--n-pairs", type=int, default=10000)
    p.add_argument("--len-min", type=int, default=5)
    p.add_argument("--len-max", type=int, default=16)
    p.add_argument("--vocab-size", type=int, default=32)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--out", required=True)

    p = add("train-teacher", "train the autoregressive teacher")
    _model_flags(p)
    _train_flags(p)

    p = add("distill", "replace targets with teacher beam outputs")
    p.add_argument("--teacher", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beam", type=int, default=4)

    p = add("train-nat", "train the non-autoregressive model")
    _model_flags(p)
    _train_flags(p)
    g = p.add_argument_group("NAT")
    g.add_argument("--sampling", choices=SAMPLING_MODES, default="dss")
    g.add_argument("--alpha", type=float, default=10.0)
    g.add_argument("--la", type=side_sizes, default=(1, 1), metavar="LS,RS")
    g.add_argument("--va", type=on_off, default=True, metavar="on|off")
    g.add_argument("--va-readout", choices=("sum", "vocab"), default="sum")
    g.add_argument("--bow", type=on_off, default=True, metavar="on|off")
    g.add_argument("--lambda", dest="lam", type=float, default=0.1)
    g.add_argument("--lambda-schedule", choices=("linear", "constant"), default="linear")
    g.add_argument("--lambda-epochs", type=int, default=5)
    g.add_argument("--ss-min-prob", type=float, default=0.5)
    g.add_argument("--kd", type=on_off, default=False, metavar="on|off")
    g.add_argument("--init-encoder", type=on_off, default=False, metavar="on|off")
    g.add_argument("--teacher", help="teacher checkpoint (needed for --kd / --init-encoder)")

    p = add("decode", "decode sources with a trained NAT")
    p.add_argument("--model", required=True)
    p.add_argument("--teacher", help="teacher checkpoint for npd / link-rescore")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="file with one tokenised source per line")
    src.add_argument("--data", help="corpus directory (uses source.txt)")
    p.add_argument("--output", help="write hypotheses here instead of into the JSON")
    p.add_argument("--details", action="store_true",
                   help="include probabilities, neighbour triples and refinement traces")
    _decode_flags(p)

    p = add("eval", "BLEU / repeat rate of hypotheses, or of a model on a corpus")
    p.add_argument("--hyp", help="hypothesis file")
    p.add_argument("--ref", help="reference file")
    p.add_argument("--model", help="decode DATA with this NAT instead of reading --hyp")
    p.add_argument("--teacher")
    p.add_argument("--data", help="corpus directory used with --model")
    p.add_argument("--lowercase", action="store_true")
    _decode_flags(p)

    p = add("bench", "batch-1 single-thread latency of decoding strategies")
    p.add_argument("--model", required=True)
    p.add_argument("--teacher")
    p.add_argument("--data", required=True)
    p.add_argument("--strategies", default="greedy,npd,dynamic,at-beam",
                   help=f"comma list from {','.join(BENCH_STRATEGIES)}")
    p.add_argument("--n", type=int, default=100, help="sentences to time")
    p.add_argument("--warmup", type=int, default=5)
    p.add_argument("--at-beam", type=int, default=4)
    p.add_argument("--out-dir", help="write bench.json and latency.png here")
    _decode_flags(p)

    p = add("grad-check", "finite-difference check of the full training objective")
    p.add_argument("--sampling", choices=SAMPLING_MODES, default="dss")
    p.add_argument("--max-entries", type=int, help="entries per parameter (default all)")
    return parser


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    argv = list(argv)
    parser = build_parser()
    if "--config" in argv:
        i = argv.index("--config")
        if i + 1 >= len(argv):
            parser.error("--config needs a file")
        try:
            extra = read_config_file(argv[i + 1])
        except (OSError, ValueError) as e:
            parser.error(str(e))
        # file values go right after the subcommand so explicit flags override them
        cmd_at = next((k for k, a in enumerate(argv) if a in COMMANDS), None)
        if cmd_at is None:
            parser.error("--config must follow a subcommand")
        argv = argv[:cmd_at + 1] + extra + argv[cmd_at + 1:]
    return parser.parse_args(argv)


# -- helpers --------------------------------------------------------------

def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _load_corpus(directory: str, vocab: Vocabulary):
    src, tgt = read_parallel(directory)
    return encode_parallel(vocab, src, tgt)


def _resolve_vocab(args) -> Vocabulary:
    if args.vocab:
        return Vocabulary.load(args.vocab)
    default = Path(args.data) / "vocab.txt"
    if default.exists():
        return Vocabulary.load(default)
    src, tgt = read_parallel(args.data)
    return build_vocab(" ".join(s + t) for s, t in zip(src, tgt))


def _model_config(args, vocab: Vocabulary, **extra) -> ModelConfig:
    return ModelConfig(vocab_size=len(vocab), d_model=args.d_model, n_heads=args.heads,
                       d_ff=args.d_ff, enc_layers=args.enc_layers, dec_layers=args.dec_layers,
                       max_len=args.max_len, rel_k=args.rel_k, dropout=args.dropout,
                       seed=args.seed, **extra)


def _train_config(args, **extra) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
                       warmup_steps=args.warmup, weight_decay=args.weight_decay,
                       label_smoothing=args.label_smoothing, avg_best=args.avg_best,
                       seed=args.seed, max_steps=args.max_steps, **extra)


def _sidecar(path: str, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix)


def _load(path: str, kind: str):
    ck = load_checkpoint(path)
    if ck.kind != kind:
        raise CheckpointError(f"{path} holds a {ck.kind} model, expected {kind}")
    return ck


def _run_training(args, model, trainer, cfg: TrainConfig, vocab: Vocabulary, **kw) -> dict:
    pairs = _load_corpus(args.data, vocab)
    dev = _load_corpus(args.dev, vocab) if args.dev else None
    metrics_path = _sidecar(args.out, ".metrics.jsonl")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(metrics_path, "w", encoding="utf-8") as stream:
        result = trainer(model, pairs, cfg, dev, metrics_stream=stream, **kw)
    save_checkpoint(model, args.out, vocab, extra={"train": cfg.to_dict()})
    out = {"checkpoint": str(args.out), "metrics_file": str(metrics_path),
           "epochs": len(result.metrics), "averaged_epochs": result.averaged_epochs,
           "final": result.metrics[-1] if result.metrics else None}
    if not args.no_plot and result.metrics:
        from .report import plot_training_curves

        out["figure"] = str(plot_training_curves(result.metrics, _sidecar(args.out, ".curves.png"),
                                                 title=Path(args.out).name))
    return out


def _decode_kw(args) -> dict:
    return dict(num_candidates=args.candidates, num_samples=args.samples, seed=args.seed,
                direction=args.direction, beam_width=args.beam, threshold=args.threshold,
                max_rounds=args.max_rounds)


def _decode_all(args, model_path: str, teacher_path: str | None, sources_tok):
    ck = _load(model_path, "nat")
    teacher = _load(teacher_path, "teacher").model if teacher_path else None
    vocab = ck.vocab
    if vocab is None:
        raise CheckpointError(f"{model_path} has no vocabulary")
    results = [decoding.decode(ck.model, vocab.encode(s), args.strategy, teacher, **_decode_kw(args))
               for s in sources_tok]
    return vocab, results


# -- commands -------------------------------------------------------------

def cmd_gen_data(args) -> dict:
    pairs = gen_synthetic(args.task, args.n_pairs, (args.len_min, args.len_max), args.vocab_size,
                          args.seed, max_len=args.max_len)
    vocab = synthetic_vocab(args.vocab_size)
    write_parallel(args.out, (vocab.decode(p.source) for p in pairs),
                   (vocab.decode(p.target) for p in pairs))
    vocab.save(Path(args.out) / "vocab.txt")
    return {"out": args.out, "task": args.task, "pairs": len(pairs), "vocab_size": len(vocab),
            "distinct_sources": len({p.source for p in pairs})}


def cmd_train_teacher(args) -> dict:
    vocab = _resolve_vocab(args)
    model = TeacherModel(_model_config(args, vocab))
    return _run_training(args, model, train_teacher, _train_config(args), vocab)


def cmd_distill(args) -> dict:
    ck = _load(args.teacher, "teacher")
    vocab = ck.vocab
    src, tgt = read_parallel(args.data)
    pairs = encode_parallel(vocab, src, tgt)
    distilled = distill_dataset(ck.model, pairs, args.beam)
    write_parallel(args.out, src, (vocab.decode(p.target) for p in distilled))
    vocab.save(Path(args.out) / "vocab.txt")
    changed = sum(a.target != b.target for a, b in zip(pairs, distilled))
    return {"out": args.out, "pairs": len(distilled), "targets_changed": changed,
            "distinct_sources": len({p.source for p in distilled}),
            "distinct_pairs": len(set(distilled))}


def cmd_train_nat(args) -> dict:
    teacher = None
    if args.kd or args.init_encoder:
        if not args.teacher:
            raise ValueError("--kd on / --init-encoder on need --teacher")
        ck = _load(args.teacher, "teacher")
        teacher, vocab = ck.model, ck.vocab
    else:
        vocab = _resolve_vocab(args)
    ls, rs = args.la
    model = NATModel(_model_config(args, vocab, ls=ls, rs=rs, va=args.va,
                                   va_readout=args.va_readout))
    cfg = _train_config(args, alpha=args.alpha, sampling=args.sampling, bow=args.bow,
                        lambda_kind=args.lambda_schedule, lambda_value=args.lam,
                        lambda_epochs=args.lambda_epochs, ss_min_prob=args.ss_min_prob,
                        use_kd=args.kd, init_encoder_from_teacher=args.init_encoder)
    return _run_training(args, model, train_nat, cfg, vocab, teacher=teacher)


def cmd_decode(args) -> dict:
    sources = read_lines(args.input) if args.input else read_parallel(args.data)[0]
    vocab, results = _decode_all(args, args.model, args.teacher, sources)
    hyps = [" ".join(vocab.decode(r.tokens)) for r in results]
    out = {"strategy": args.strategy, "sentences": len(results),
           "mean_latency_ms": float(np.mean([r.latency_ms for r in results])) if results else 0.0}
    if args.output:
        Path(args.output).write_text("".join(h + "\n" for h in hyps), encoding="utf-8")
        out["output"] = args.output
    else:
        out["hypotheses"] = hyps
    if args.details:
        out["details"] = [asdict(r) for r in results]
    return out


def cmd_eval(args) -> dict:
    if args.model:
        if not args.data:
            raise ValueError("--model needs --data")
        src, refs = read_parallel(args.data)
        vocab, results = _decode_all(args, args.model, args.teacher, src)
        hyps = [vocab.decode(r.tokens) for r in results]
    else:
        if not (args.hyp and args.ref):
            raise ValueError("give --hyp and --ref, or --model and --data")
        hyps, refs = read_lines(args.hyp), read_lines(args.ref)
    return {"bleu": bleu(hyps, refs, lowercase=args.lowercase),
            "repeat_rate": repeated_token_rate(hyps),
            "exact_match": exact_match(hyps, refs), "sentences": len(hyps)}


def cmd_bench(args) -> dict:
    ck = _load(args.model, "nat")
    teacher = _load(args.teacher, "teacher").model if args.teacher else None
    vocab = ck.vocab
    src, tgt = read_parallel(args.data)
    n = min(args.n, len(src))
    sources = [vocab.encode(s) for s in src[:n]]
    refs = [vocab.encode(t) for t in tgt[:n]]
    strategies = [s for s in args.strategies.split(",") if s]
    unknown = set(strategies) - set(BENCH_STRATEGIES)
    if unknown:
        raise ValueError(f"unknown strategies {sorted(unknown)}")
    report = latency_bench(ck.model, teacher, strategies, sources, refs, warmup=args.warmup,
                           at_beam=args.at_beam, **_decode_kw(args))
    out = report.to_dict()
    if args.out_dir:
        from .report import plot_latency

        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / "bench.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
        out["figure"] = str(plot_latency(report, d / "latency.png"))
    return out


def cmd_grad_check(args) -> dict:
    errors = check_nat_loss(args.seed, args.sampling, max_entries=args.max_entries)
    worst = max(errors, key=errors.get)
    return {"parameters": len(errors), "max_rel_error": errors[worst], "worst": worst,
            "tolerance": GRAD_TOLERANCE, "passed": errors[worst] <= GRAD_TOLERANCE}


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train-teacher": cmd_train_teacher,
    "distill": cmd_distill,
    "train-nat": cmd_train_nat,
    "decode": cmd_decode,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "grad-check": cmd_grad_check,
}


def run_cli(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as e:  # argparse: usage already printed
        return int(e.code or 0)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError, CheckpointError) as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n")
        return 1
    _emit(result)
    if args.command == "grad-check" and not result["passed"]:
        return 1
    return 0


def main() -> None:
    sys.exit(run_cli())
