import csv
import json
import subprocess
import sys

import pytest

from modgrok.cli import main
from modgrok.experiments import table1_accuracies
from modgrok.idealize import COS_COS, construct_scratch_model
from modgrok.io import save_checkpoint
from modgrok.mlp import Checkpoint

TINY = ["--p", "11", "--n-hidden", "16", "--max-steps", "400", "--eval-every", "50", "--patience", "200"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_train_writes_run_directory(tmp_path):
    assert main(["train", *TINY, "--run-dir", str(tmp_path / "r")]) == 0
    names = {p.name for p in (tmp_path / "r").iterdir()}
    assert {"manifest.json", "metrics.csv", "final.json"} <= names
    man = json.loads((tmp_path / "r" / "manifest.json").read_text())
    assert man["status"] == "done" and man["stop_reason"] in ("plateau", "val-threshold", "max-steps")
    assert man["config"]["p"] == 11 and "wall_time" in man


def test_train_rerun_metrics_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["train", *TINY, "--seed", "3", "--alpha", "0.1", "--run-dir", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()
    assert (tmp_path / "a" / "final.json").read_bytes() == (tmp_path / "b" / "final.json").read_bytes()


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MODGROK_OUTPUT_ROOT", str(tmp_path / "root"))
    assert main(["train", *TINY, "--alpha", "0.3", "--seed", "1"]) == 0
    assert (tmp_path / "root" / "alpha0.30_seed1" / "final.json").exists()


def test_config_file_then_flags(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"p": 11, "n_hidden": 8, "max_steps": 100, "eval_every": 50, "seed": 4}))
    assert main(["train", "--config", str(cfg), "--n-hidden", "12", "--run-dir", str(tmp_path / "r")]) == 0
    conf = json.loads((tmp_path / "r" / "manifest.json").read_text())["config"]
    assert (conf["n_hidden"], conf["seed"], conf["max_steps"]) == (12, 4, 100)


def test_fast_profile_values(tmp_path):
    # the fast profile sets p and width; flags still win on the step budget
    assert main(["train", "--fast", "--max-steps", "50", "--run-dir", str(tmp_path / "r")]) == 0
    conf = json.loads((tmp_path / "r" / "manifest.json").read_text())["config"]
    assert (conf["p"], conf["n_hidden"], conf["eval_every"]) == (31, 128, 50)


@pytest.mark.parametrize(
    "extra",
    [["--alpha", "1.5"], ["--p", "1"], ["--lr", "-1"], ["--n-hidden", "0"], ["--eval-every", "0"]],
)
def test_invalid_config_exit_1(tmp_path, extra, capsys):
    assert main(["train", *TINY, *extra, "--run-dir", str(tmp_path / "r")]) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_config_key_exit_1(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"learning_rate": 0.1}))
    assert main(["train", "--config", str(cfg), "--run-dir", str(tmp_path / "r")]) == 1
    cfg.write_text("[1]")
    assert main(["train", "--config", str(cfg), "--run-dir", str(tmp_path / "r")]) == 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_exit_2_with_failed_manifest(tmp_path):
    run = tmp_path / "r"
    assert main(["train", *TINY, "--lr", "1e200", "--weight-decay", "0", "--run-dir", str(run)]) == 2
    assert json.loads((run / "manifest.json").read_text())["status"] == "failed"


def test_sweep_two_runs_then_resume(tmp_path, caplog):
    out = tmp_path / "sw"
    args = ["sweep", *TINY, "--alphas", "0,0.3", "--seeds", "1", "--out", str(out)]
    assert main(args) == 0
    assert sorted(p.name for p in out.iterdir() if p.is_dir()) == ["alpha0.00_seed1", "alpha0.30_seed1"]
    man = json.loads((out / "sweep.json").read_text())
    assert all(r["status"] == "done" for r in man["runs"].values())
    stamp = (out / "alpha0.00_seed1" / "final.json").stat().st_mtime_ns
    with caplog.at_level("INFO"):
        assert main(args) == 0
    assert (out / "alpha0.00_seed1" / "final.json").stat().st_mtime_ns == stamp
    assert caplog.text.count("skipping completed run") == 2


def test_sweep_resume_reruns_missing_checkpoint(tmp_path):
    out = tmp_path / "sw"
    args = ["sweep", *TINY, "--alphas", "0", "--seeds", "2", "--out", str(out)]
    assert main(args) == 0
    (out / "alpha0.00_seed2" / "final.json").unlink()
    assert main(args) == 0
    assert (out / "alpha0.00_seed2" / "final.json").exists()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_sweep_failure_exit_2(tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", *TINY, "--lr", "1e200", "--weight-decay", "0", "--alphas", "0", "--seeds", "0", "--out", str(out)]) == 2
    man = json.loads((out / "sweep.json").read_text())
    assert man["runs"]["alpha0.00_seed0"]["status"] == "failed"


def test_sweep_bad_alpha_exit_1(tmp_path):
    assert main(["sweep", *TINY, "--alphas", "0,1.2", "--out", str(tmp_path)]) == 1


def test_construct_table_single_cell(tmp_path):
    out = tmp_path / "t1.csv"
    assert main(["construct-table", "--widths", "64", "--seeds", "0", "--settings", "Sq->Cos", "--output", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 1
    assert rows[0]["n_hidden"] == "64" and rows[0]["setting"] == "Sq->Cos"
    assert float(rows[0]["sd_acc"]) == 0.0 and rows[0]["n_seeds"] == "1"


def test_construct_table_stdout(capsys):
    assert main(["construct-table", "--widths", "16,32", "--seeds", "0-2"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "n_hidden,setting,mean_acc,sd_acc,n_seeds"
    assert len(lines) == 1 + 2 * 3


@pytest.mark.parametrize("args", [["--widths", ""], ["--widths", "0"], ["--settings", "cos->sq"]])
def test_construct_table_bad_input(args):
    assert main(["construct-table", "--seeds", "0", *args]) == 1


def test_extract_table_empty_directory(tmp_path, capsys):
    out = tmp_path / "t2.csv"
    assert main(["extract-table", str(tmp_path), "--output", str(out)]) == 0
    assert out.read_text().strip() == "alpha,seed,checkpoint,step,real,Sq->Sq,Sq->Cos,Cos->Cos"
    assert "1 warning(s)" in capsys.readouterr().err


def test_extract_table_missing_directory(tmp_path):
    assert main(["extract-table", str(tmp_path / "nope")]) == 1


def test_extract_table_on_sweep(tmp_path, capsys):
    out = tmp_path / "sw"
    assert main(["sweep", *TINY, "--alphas", "0,0.3", "--seeds", "0", "--out", str(out)]) == 0
    capsys.readouterr()
    table = tmp_path / "t2.csv"
    assert main(["extract-table", str(out), "--settings", "Sq->Cos", "--output", str(table)]) == 0
    rows = read_csv(table)
    assert list(rows[0]) == ["alpha", "seed", "checkpoint", "step", "real", "Sq->Cos"]
    finals = [r for r in rows if r["checkpoint"] == "final"]
    assert [float(r["alpha"]) for r in finals] == [0.0, 0.3]
    n_missing_sat = 4 - len(rows)
    if n_missing_sat:
        assert f"{n_missing_sat} warning(s)" in capsys.readouterr().err


def test_analyze_constructed_checkpoint(tmp_path):
    path = tmp_path / "c.json"
    save_checkpoint(path, Checkpoint(construct_scratch_model(97, 64, COS_COS, 0), 0, "constructed", {}))
    assert main(["analyze", str(path), "--out", str(tmp_path / "a")]) == 0
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    assert rep["format_version"] == 1 and rep["file"] == "report"
    assert rep["summary"]["r_all"] == pytest.approx(1.0, abs=1e-12)
    assert rep["summary"]["n_structured"] == 64
    # no split recorded, so accuracy is over all pairs
    assert rep["summary"]["accuracy"] == table1_accuracies([64], [0], COS_COS)[0, 0]
    for name in ("summary.csv", "neurons.csv", "fig_phases.csv", "fig_weights.csv"):
        assert (tmp_path / "a" / name).exists()
    assert len(read_csv(tmp_path / "a" / "neurons.csv")) == 64
    assert len(read_csv(tmp_path / "a" / "fig_weights.csv")) == 64 * 2 * 97


@pytest.mark.parametrize("content", ["{not json", json.dumps({"format_version": 99, "file": "checkpoint"})])
def test_analyze_bad_checkpoint_exit_1(tmp_path, content, capsys):
    path = tmp_path / "c.json"
    path.write_text(content)
    assert main(["analyze", str(path)]) == 1
    assert "error" in capsys.readouterr().err


def test_analyze_missing_path_exit_1(tmp_path):
    assert main(["analyze", str(tmp_path / "none.json")]) == 1


def test_analyze_sweep_directory(tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", *TINY, "--alphas", "0,0.1,0.3", "--seeds", "0", "--out", str(out)]) == 0
    assert main(["analyze", str(out), "--out", str(tmp_path / "a")]) == 0
    rows = read_csv(tmp_path / "a" / "sweep_summary.csv")
    assert [float(r["alpha"]) for r in rows] == [0.0, 0.1, 0.3]
    assert (tmp_path / "a" / "alpha0.10_seed0" / "report.json").exists()
    assert len(read_csv(tmp_path / "a" / "fig_sweep_phases.csv")) == 3 * 16


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "modgrok.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("train", "sweep", "construct-table", "extract-table", "analyze"):
        assert cmd in res.stdout
