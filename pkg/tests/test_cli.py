import json
import subprocess
import sys

import pytest

from lava.bench import BenchReport, StrategyStats, latency_bench
from lava.cli import parse_args, run_cli
from lava.gradcheck import tiny_nat_config
from lava.nat import NATModel
from lava.report import plot_latency, plot_training_curves
from lava.teacher import TeacherModel

SMALL = ["--d-model", "8", "--heads", "2", "--d-ff", "16", "--enc-layers", "1",
         "--dec-layers", "1", "--max-len", "24", "--rel-k", "2", "--epochs", "2",
         "--batch-size", "16", "--no-plot"]


def run(capsys, *argv):
    code = run_cli([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Data, a teacher and a NAT trained through the CLI (tiny sizes)."""
    d = tmp_path_factory.mktemp("cli")
    assert run_cli(["gen-data", "--task", "copy", "--n-pairs", "80", "--len-min", "3",
                    "--len-max", "8", "--vocab-size", "16", "--out", str(d / "data")]) == 0
    assert run_cli(["train-teacher", "--data", str(d / "data"), "--out", str(d / "t.ckpt"),
                    *SMALL]) == 0
    assert run_cli(["train-nat", "--data", str(d / "data"), "--dev", str(d / "data"),
                    "--out", str(d / "n.ckpt"), "--la", "1,1", *SMALL]) == 0
    return d


def test_gen_data_outputs(workdir):
    data = workdir / "data"
    assert len((data / "source.txt").read_text().splitlines()) == 80
    assert (data / "vocab.txt").exists()


def test_training_writes_metrics(workdir):
    lines = (workdir / "n.metrics.jsonl").read_text().splitlines()
    assert len(lines) == 2
    assert {"loss", "dev_loss", "token_acc", "repeat_rate"} <= set(json.loads(lines[0]))


@pytest.mark.parametrize("strategy", ["greedy", "npd", "link-rescore", "sequential", "dynamic"])
def test_decode_every_strategy(workdir, capsys, strategy):
    code, out, _ = run(capsys, "decode", "--model", workdir / "n.ckpt", "--teacher",
                       workdir / "t.ckpt", "--data", workdir / "data", "--strategy", strategy)
    assert code == 0 and out["sentences"] == 80 and len(out["hypotheses"]) == 80


def test_eval_from_files(workdir, capsys, tmp_path):
    (tmp_path / "h.txt").write_text("a b c d\n")
    (tmp_path / "r.txt").write_text("a b c d\n")
    code, out, _ = run(capsys, "eval", "--hyp", tmp_path / "h.txt", "--ref", tmp_path / "r.txt")
    assert code == 0 and out["bleu"] == pytest.approx(100.0) and out["exact_match"] == 1.0


def test_bench_writes_json_and_figure(workdir, capsys, tmp_path):
    code, out, _ = run(capsys, "bench", "--model", workdir / "n.ckpt", "--teacher",
                       workdir / "t.ckpt", "--data", workdir / "data", "--n", 10,
                       "--strategies", "greedy,dynamic,at-beam", "--out-dir", tmp_path)
    assert code == 0
    assert set(out["strategies"]) == {"greedy", "dynamic", "at-beam"}
    assert out["strategies"]["at-beam"]["speedup"] == pytest.approx(1.0)
    assert (tmp_path / "bench.json").exists() and (tmp_path / "latency.png").stat().st_size > 0


def test_distill(workdir, capsys, tmp_path):
    code, out, _ = run(capsys, "distill", "--teacher", workdir / "t.ckpt", "--data",
                       workdir / "data", "--out", tmp_path / "kd")
    assert code == 0 and out["pairs"] == 80


def test_wrong_checkpoint_kind_is_an_error(workdir, capsys):
    code, _, err = run(capsys, "decode", "--model", workdir / "t.ckpt", "--data", workdir / "data")
    assert code == 1 and json.loads(err)["error"] == "CheckpointError"


def test_missing_teacher_for_npd(workdir, capsys):
    code, _, err = run(capsys, "decode", "--model", workdir / "n.ckpt", "--data",
                       workdir / "data", "--strategy", "npd")
    assert code == 1 and "teacher" in json.loads(err)["message"]


@pytest.mark.parametrize("argv", [
    ["train-nat", "--data", "d", "--out", "o", "--la", "2,1"],
    ["train-nat", "--data", "d", "--out", "o", "--va", "maybe"],
    ["decode", "--model", "m", "--strategy", "beam", "--data", "d"],
    ["frobnicate"],
])
def test_bad_flags_exit_2(capsys, argv):
    assert run_cli(argv) == 2


def test_config_file_defaults_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nepochs = 7\nsampling = tf\nla = 0,1\n")
    args = parse_args(["train-nat", "--config", str(cfg), "--data", "d", "--out", "o",
                       "--epochs", "3"])
    assert args.epochs == 3 and args.sampling == "tf" and args.la == (0, 1)


def test_grad_check_command(capsys):
    code, out, _ = run(capsys, "grad-check", "--max-entries", "2")
    assert code == 0 and out["passed"] and out["max_rel_error"] < 1e-4


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lava", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "train-nat" in proc.stdout


# -- bench and figures without the CLI -------------------------------------

def test_latency_bench_requires_warmup():
    nat = NATModel(tiny_nat_config(vocab_size=12))
    with pytest.raises(ValueError):
        latency_bench(nat, None, ["greedy"], [[4, 5]] * 6, warmup=2)


def test_latency_bench_counts_work():
    nat = NATModel(tiny_nat_config(vocab_size=12))
    teacher = TeacherModel(tiny_nat_config(vocab_size=12))
    rep = latency_bench(nat, teacher, ["greedy", "npd", "at-greedy"], [[4, 5, 6]] * 6,
                        num_candidates=3)
    assert rep.strategies["greedy"].decoder_forwards == 1
    assert rep.strategies["npd"].candidates_scored == 3
    assert rep.strategies["at-greedy"].at_steps >= 2


def test_figures(tmp_path):
    metrics = [{"epoch": e, "loss": 3.0 / (e + 1), "token_acc": 0.2 * e} for e in range(3)]
    assert plot_training_curves(metrics, tmp_path / "c.png").stat().st_size > 0
    rep = BenchReport({"greedy": StrategyStats(1.0, 9.0), "at-beam": StrategyStats(9.0, 1.0)}, 5, 10.0)
    assert plot_latency(rep, tmp_path / "l.png").stat().st_size > 0
    with pytest.raises(ValueError):
        plot_training_curves([], tmp_path / "x.png")
