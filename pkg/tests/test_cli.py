import json

import pytest

from ide2net import cli
from ide2net.harness import read_csv
from ide2net.unfolded import Ide2NetParams, load_params

SMALL = ["--antennas", "16", "--users", "4"]


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_train_zero_epochs_writes_warm_start(tmp_path):
    assert run("train", "--layers", 5, "--epochs", 0, "--out", tmp_path, *SMALL) == 0
    assert load_params(tmp_path / "params.json") == Ide2NetParams.warm_start(5)
    assert (tmp_path / "train_log.csv").read_text().startswith("epoch,train_loss,val_loss,lr\n")
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "train" and man["config"]["precoder"]["layers"] == "5"
    assert "version" in man


def test_train_log_shows_decay(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[train]\nepochs = 4\nsamples_per_epoch = 100\nbatch_size = 50\nlr_decay_every = 2\n"
                   "validation_samples = 50\n")
    assert run("train", "--config", cfg, "--layers", 2, "--out", tmp_path / "o", *SMALL) == 0
    rows = read_csv(tmp_path / "o" / "train_log.csv")
    assert [r["lr"] for r in rows[1:]] == pytest.approx([0.01, 0.01, 0.001, 0.001])


def test_missing_config_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.ini"
    assert run("train", "--config", missing) == 1
    assert str(missing) in capsys.readouterr().err


def test_bad_usage_exit_code(capsys):
    assert run("sweep", "--no-such-flag") == 1
    assert run("--version") == 0


def test_bad_config_value(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[system]\nantennas = many\n")
    assert run("eval", "--config", cfg) == 1
    assert run("eval", "--antennas", 4, "--users", 8) == 1
    assert run("eval", "--precoder", "ide2-net", *SMALL) == 1


def test_layers_sweep_csv(tmp_path):
    out = tmp_path / "s"
    assert run("sweep", "--kind", "layers", "--precoder", "ide2", "--values", "1,2,5,10,20,50",
               "--trials", 5, "--out", out, *SMALL) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "sweep_value,ber,stderr,mse_mean,iui_mean,bits_total,trials_discarded"
    assert len(lines) == 7
    man = json.loads((out / "sweep.manifest.json").read_text())
    assert man["sweep"]["values"] == [1, 2, 5, 10, 20, 50]


def test_sweep_byte_identical_across_threads(tmp_path):
    args = ["sweep", "--kind", "snr", "--values", "0,10", "--trials", 30, "--seed", 4, *SMALL]
    assert run(*args, "--threads", 1, "--out", tmp_path / "a") == 0
    assert run(*args, "--threads", 3, "--out", tmp_path / "b") == 0
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[system]\nantennas = 16\nusers = 4\nsnr_db = 5\n[sweep]\ntrials = 3\nepsilon = 0.5\n")
    out = tmp_path / "o"
    assert run("eval", "--config", cfg, "--epsilon", 0.2, "--snr-db", 9, "--out", out) == 0
    man = json.loads((out / "eval.manifest.json").read_text())
    assert man["config"]["system"]["snr_db"] == "9.0"
    assert man["sweep"]["epsilon"] == 0.2 and man["sweep"]["system"]["snr_db"] == 9.0
    assert man["sweep"]["trials_per_point"] == 3
    assert read_csv(out / "eval.csv")[0]["sweep_value"] == 0.2


def test_epsilon_sweep_with_network(tmp_path):
    assert run("train", "--layers", 3, "--epochs", 0, "--out", tmp_path / "t", *SMALL) == 0
    out = tmp_path / "e"
    assert run("sweep", "--kind", "epsilon", "--precoder", "ide2-net", "--params", tmp_path / "t" / "params.json",
               "--layers", 3, "--values", "0,0.5,1", "--trials", 5, "--out", out, *SMALL) == 0
    assert len(read_csv(out / "sweep.csv")) == 3
    # a layers sweep needs a parameter file for each T
    assert run("sweep", "--kind", "layers", "--precoder", "ide2-net", "--params", tmp_path / "t" / "params.json",
               "--values", "3,5", "--trials", 5, "--out", out, *SMALL) == 1


def test_oracle_rows_and_refusal(tmp_path, capsys):
    out = tmp_path / "o"
    assert run("oracle", "--antennas", 2, "--users", 1, "--instances", 100, "--out", out) == 0
    rows = read_csv(out / "oracle.csv")
    assert len(rows) == 100 and all(r["ratio"] >= 1 for r in rows)
    assert run("oracle", "--antennas", 20, "--users", 2, "--out", out) == 1
    assert "1000000" in capsys.readouterr().err


def test_training_abort_exit_code(tmp_path):
    cfg = tmp_path / "wild.ini"
    cfg.write_text("[train]\noptimizer = sgd\nlr_initial = 1e4\nlr_decay_every = 1000\nepochs = 30\n"
                   "samples_per_epoch = 100\nbatch_size = 50\nvalidation_samples = 50\n")
    assert run("train", "--config", cfg, "--layers", 3, "--out", tmp_path / "o", *SMALL) == 2
    assert (tmp_path / "o" / "train_log.csv").exists()


def test_plot_script(tmp_path):
    csv = tmp_path / "a.csv"
    csv.write_text("sweep_value,ber,stderr\n1,0.1,0.01\n")
    assert run("plot", csv, "--out", tmp_path / "p", "--xlabel", "T") == 0
    script = (tmp_path / "p" / "plot.gp").read_text()
    assert str(csv.resolve()) in script and 'set xlabel "T"' in script
    assert run("plot", tmp_path / "missing.csv", "--out", tmp_path / "p") == 1
